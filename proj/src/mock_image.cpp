#include "biasprobe/mock_image.hpp"

#include <zlib.h>

#include <array>
#include <map>
#include <mutex>
#include <utility>

namespace biasprobe {

namespace {

constexpr std::array<std::uint8_t, 8> kSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_chunk(std::vector<std::uint8_t>& out, std::string_view type,
               std::span<const std::uint8_t> data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const auto type_at = out.size();
  out.insert(out.end(), type.begin(), type.end());
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

// Filtered scanline bytes for a non-interlaced image.
std::size_t raw_size(int width, int height, int channels = 1, int bit_depth = 8) {
  const auto row_bits = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels * bit_depth);
  return static_cast<std::size_t>(height) * ((row_bits + 7) / 8 + 1);
}

int channels_for(int color_type) {
  switch (color_type) {
    case 0: return 1;  // grayscale
    case 2: return 3;  // RGB
    case 3: return 1;  // palette
    case 4: return 2;  // grayscale + alpha
    case 6: return 4;  // RGBA
    default: return 0;
  }
}

// The pixel data of a blank image depends only on its size; compress once.
const std::vector<std::uint8_t>& blank_idat(int width, int height) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::vector<std::uint8_t>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{width, height}];
  if (slot.empty()) {
    const std::vector<std::uint8_t> raw(raw_size(width, height), 0);
    uLongf len = compressBound(static_cast<uLong>(raw.size()));
    slot.resize(len);
    if (compress2(slot.data(), &len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
      throw std::runtime_error("zlib compression failed");
    }
    slot.resize(len);
  }
  return slot;
}

}  // namespace

std::vector<std::uint8_t> encode_mock_png(int width, int height, std::string_view payload) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be positive");
  std::vector<std::uint8_t> out(kSignature.begin(), kSignature.end());

  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(width));
  put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});  // 8-bit grayscale, deflate, no filter, no interlace
  put_chunk(out, "IHDR", ihdr);

  std::vector<std::uint8_t> text(kMockTextKeyword.begin(), kMockTextKeyword.end());
  text.push_back(0);
  text.insert(text.end(), payload.begin(), payload.end());
  put_chunk(out, "tEXt", text);

  put_chunk(out, "IDAT", blank_idat(width, height));
  put_chunk(out, "IEND", {});
  return out;
}

DecodedImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kSignature.size() ||
      !std::equal(kSignature.begin(), kSignature.end(), bytes.begin())) {
    throw ImageDecodeError("not a PNG image");
  }
  DecodedImage img;
  std::vector<std::uint8_t> idat;
  bool have_ihdr = false;
  int channels = 1;
  int bit_depth = 8;
  bool interlaced = false;
  bool have_iend = false;
  std::size_t at = kSignature.size();
  while (at + 12 <= bytes.size() && !have_iend) {
    const std::uint32_t len = get_u32(bytes, at);
    if (at + 12 + std::size_t{len} > bytes.size()) throw ImageDecodeError("truncated PNG chunk");
    const auto type = std::string_view(reinterpret_cast<const char*>(bytes.data() + at + 4), 4);
    const auto data = bytes.subspan(at + 8, len);
    const auto crc = crc32(0L, bytes.data() + at + 4, static_cast<uInt>(4 + len));
    if (static_cast<std::uint32_t>(crc) != get_u32(bytes, at + 8 + len)) {
      throw ImageDecodeError("PNG chunk CRC mismatch in " + std::string(type));
    }
    if (type == "IHDR") {
      if (len != 13) throw ImageDecodeError("malformed IHDR");
      img.width = static_cast<int>(get_u32(data, 0));
      img.height = static_cast<int>(get_u32(data, 4));
      if (img.width <= 0 || img.height <= 0) throw ImageDecodeError("zero-sized PNG");
      bit_depth = data[8];
      channels = channels_for(data[9]);
      interlaced = data[12] != 0;
      if (channels == 0) throw ImageDecodeError("unknown PNG color type");
      if (bit_depth != 1 && bit_depth != 2 && bit_depth != 4 && bit_depth != 8 && bit_depth != 16) {
        throw ImageDecodeError("invalid PNG bit depth");
      }
      have_ihdr = true;
    } else if (type == "tEXt") {
      const std::string_view text(reinterpret_cast<const char*>(data.data()), data.size());
      const auto nul = text.find('\0');
      if (nul != std::string_view::npos && text.substr(0, nul) == kMockTextKeyword) {
        img.mock_payload = std::string(text.substr(nul + 1));
      }
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data.begin(), data.end());
    } else if (type == "IEND") {
      have_iend = true;
    }
    at += 12 + std::size_t{len};
  }
  if (!have_ihdr || !have_iend) throw ImageDecodeError("PNG missing IHDR or IEND");

  // Adam7 images are larger than the plain scanline count; only bound those.
  const auto expected = raw_size(img.width, img.height, channels, bit_depth);
  std::vector<std::uint8_t> raw(interlaced ? 2 * expected + 64 : expected);
  uLongf out_len = static_cast<uLongf>(raw.size());
  const int rc = uncompress(raw.data(), &out_len, idat.data(), static_cast<uLong>(idat.size()));
  if (rc != Z_OK || (!interlaced && out_len != expected)) {
    throw ImageDecodeError("PNG pixel data does not match the declared size");
  }
  return img;
}

}  // namespace biasprobe

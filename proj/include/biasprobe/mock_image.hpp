#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace biasprobe {

inline constexpr std::string_view kMockTextKeyword = "biasprobe-mock";

class ImageDecodeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DecodedImage {
  int width = 0;
  int height = 0;
  std::optional<std::string> mock_payload;  // tEXt chunk under kMockTextKeyword
};

// Blank 8-bit grayscale PNG of the given size carrying `payload` in a tEXt chunk.
std::vector<std::uint8_t> encode_mock_png(int width, int height, std::string_view payload);

// Checks the signature, chunk CRCs, IHDR and that the pixel stream inflates to
// the declared size. Throws ImageDecodeError otherwise.
DecodedImage decode_png(std::span<const std::uint8_t> bytes);

}  // namespace biasprobe

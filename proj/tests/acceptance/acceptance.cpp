// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "biasprobe/mock_backend.hpp"
#include "biasprobe/pipeline.hpp"
#include "biasprobe/published_counts.hpp"
#include "biasprobe/report.hpp"
#include "biasprobe/simulation.hpp"
#include "biasprobe/special_functions.hpp"
#include "biasprobe/stats.hpp"
#include "biasprobe/vocabulary.hpp"

extern char** environ;

using namespace biasprobe;
namespace fs = std::filesystem;

namespace tol {
constexpr double kStatisticRelative = 1e-10;
constexpr double kPValueAbsolute = 1e-8;
constexpr double kOracleSeconds = 5.0;
constexpr double kComplementAbsolute = 1e-12;
constexpr double kErfcAbsolute = 1e-10;
constexpr double kExpAbsolute = 1e-12;
constexpr double kReproduceSeconds = 1.0;
constexpr double kNullSeconds = 60.0;
constexpr double kNullRateLow = 0.03;
constexpr double kNullRateHigh = 0.07;
constexpr double kPowerRate = 0.95;
}  // namespace tol

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

long double textbook_statistic(const ContingencyTable& t) {
  long double r0 = 0, r1 = 0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    r0 += t.counts[0][j];
    r1 += t.counts[1][j];
  }
  const long double n = r0 + r1;
  long double s = 0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    const long double c = t.counts[0][j] + t.counts[1][j];
    if (c == 0) continue;
    for (int g = 0; g < 2; ++g) {
      const long double e = (g ? r1 : r0) * c / n;
      const long double d = t.counts[g][j] - e;
      s += d * d / e;
    }
  }
  return s;
}

Verdict chi_squared_oracle() {
  std::mt19937_64 rng(0xACCE55);
  double worst_stat = 0, worst_p = 0;
  int bad = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 60);
    ContingencyTable t;
    t.groups = {"male", "female"};
    for (int j = 0; j < k; ++j) {
      t.categories.push_back("c" + std::to_string(j));
      t.counts[0].push_back(static_cast<std::int64_t>(rng() % 200) * (rng() % 4 != 0));
      t.counts[1].push_back(static_cast<std::int64_t>(rng() % 200) * (rng() % 4 != 0));
    }
    t.counts[0][0] += 1;
    t.counts[1][1] += 1;
    t.counts[0][1] += 1;
    const auto r = chi_squared(t);
    const double ref_stat = static_cast<double>(textbook_statistic(t));
    const double ref_p =
        boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.df), ref_stat));
    const double rel = std::abs(r.statistic - ref_stat) / std::max(ref_stat, 1e-300);
    const double abs_p = std::abs(r.p_value - ref_p);
    worst_stat = std::max(worst_stat, rel);
    worst_p = std::max(worst_p, abs_p);
    if (rel > tol::kStatisticRelative || abs_p > tol::kPValueAbsolute) ++bad;
  }
  const double elapsed = seconds_since(t0);
  return {bad == 0 && elapsed < tol::kOracleSeconds,
          "100 tables, max rel stat err " + fmt("%.2e", worst_stat) + ", max abs p err " + fmt("%.2e", worst_p) +
              ", " + fmt("%.3f", elapsed) + " s"};
}

Verdict special_functions() {
  int bad = 0;
  for (double a : {0.1, 0.5, 1.0, 3.0, 50.0}) bad += regularized_gamma_q(a, 0.0) != 1.0;
  double worst_exp = 0;
  for (int i = 0; i < 20; ++i) {
    const double x = 0.37 * i;
    worst_exp = std::max(worst_exp, std::abs(regularized_gamma_q(1.0, x) - std::exp(-x)));
  }
  double worst_sum = 0;
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      const double a = 0.1 + 2.0 * i, x = 2.5 * j;
      worst_sum = std::max(worst_sum, std::abs(regularized_gamma_p(a, x) + regularized_gamma_q(a, x) - 1.0));
    }
  }
  double worst_erfc = 0;
  for (int i = 1; i <= 20; ++i) {
    const double x = 0.3 * i;
    worst_erfc = std::max(worst_erfc, std::abs(regularized_gamma_q(0.5, x) - std::erfc(std::sqrt(x))));
  }
  const bool ok = bad == 0 && worst_exp <= tol::kExpAbsolute && worst_sum <= tol::kComplementAbsolute &&
                  worst_erfc <= tol::kErfcAbsolute;
  return {ok, "Q(a,0) exact, |Q(1,x)-e^-x| " + fmt("%.1e", worst_exp) + ", |P+Q-1| " + fmt("%.1e", worst_sum) +
                  ", |Q(.5,x)-erfc| " + fmt("%.1e", worst_erfc)};
}

Verdict reproduction() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto entries = reproduce_published();
  const auto text = reproduction_report(entries);
  const double elapsed = seconds_since(t0);
  std::ifstream in(fs::path(BIASPROBE_SOURCE_DIR) / "tests/golden/reproduce_paper.txt");
  std::stringstream golden;
  golden << in.rdbuf();
  std::set<std::string> matched;
  for (const auto& e : entries)
    if (e.matches) matched.insert(e.model + ":" + e.variant_id);
  const bool ok = entries.size() == 8 && elapsed < tol::kReproduceSeconds && text == golden.str();
  std::string m;
  for (const auto& s : matched) m += (m.empty() ? "" : ", ") + s;
  return {ok, std::to_string(entries.size()) + " variants in " + fmt("%.4f", elapsed) + " s, golden " +
                  (text == golden.str() ? "identical" : "DIFFERS") + ", matches: " + (m.empty() ? "none" : m)};
}

Verdict plan_arithmetic() {
  const auto plan = expand(default_templates(), default_pairs(), kDefaultReplicates, 0);
  std::map<std::tuple<int, int, int>, std::set<std::uint64_t>> seeds;
  std::map<std::tuple<int, int, int>, std::set<std::string>> sides;
  for (const auto& i : plan.instances) {
    seeds[{i.template_id, i.pair_id, i.replicate}].insert(i.seed);
    sides[{i.template_id, i.pair_id, i.replicate}].insert(i.group);
  }
  std::size_t shared = 0;
  for (const auto& [k, s] : seeds) shared += s.size() == 1 && sides[k].size() == 2;
  const bool ok = plan.distinct_prompt_count() == 200 && plan.instances.size() == 1000 && seeds.size() == 500 &&
                  shared == 500;
  return {ok, std::to_string(plan.distinct_prompt_count()) + " prompts, " + std::to_string(plan.instances.size()) +
                  " instances, " + std::to_string(shared) + "/" + std::to_string(seeds.size()) +
                  " pair groups share one seed"};
}

Verdict simulation(Scenario scenario, std::size_t trials) {
  SimulationSettings s;
  s.scenario = scenario;
  s.trials = trials;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = simulate(s);
  const double elapsed = seconds_since(t0);
  const std::string detail = std::to_string(r.rejections) + "/" + std::to_string(trials) + " rejected, rate " +
                             fmt("%.3f", r.rejection_rate) + ", " + fmt("%.1f", elapsed) + " s";
  if (scenario == Scenario::null) {
    return {elapsed < tol::kNullSeconds && r.rejection_rate >= tol::kNullRateLow &&
                r.rejection_rate <= tol::kNullRateHigh,
            detail};
  }
  return {r.rejection_rate >= tol::kPowerRate, detail};
}

// Worker mode for the crash test: run or resume the default plan, then exit.
int child_run(const fs::path& dir, int concurrency) {
  const auto plan = expand(default_templates(), default_pairs(), kDefaultReplicates, 0);
  const auto vocab = DetectorVocabulary::coco80();
  MockGenerator gen(null_mock_config());
  MockDetector det(vocab);
  RunSettings settings;
  settings.concurrency = concurrency;
  if (fs::exists(dir / "manifest.json")) {
    resume(plan, gen, det, vocab, settings, dir);
  } else {
    run_plan(plan, gen, det, vocab, settings, dir);
  }
  return 0;
}

std::size_t journal_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::size_t n = 0;
  for (char c; in.get(c);) n += c == '\n';
  return n;
}

std::string final_counts(const fs::path& dir) {
  const auto results = collect_results(dir);
  if (results.failed != 0) return "incomplete";
  return counts_csv(build_table(results.records, {"male", "female"}, DetectorVocabulary::coco80()));
}

// Spawns a worker and SIGKILLs it once the journal holds `target` lines.
// Returns true if the kill landed before the worker finished.
bool kill_at(const fs::path& self, const fs::path& dir, int concurrency, std::size_t target) {
  const std::string conc = std::to_string(concurrency);
  const std::string d = dir.string();
  const char* argv[] = {self.c_str(), "--child-run", d.c_str(), conc.c_str(), nullptr};
  pid_t pid = 0;
  if (posix_spawn(&pid, self.c_str(), nullptr, nullptr, const_cast<char**>(argv), environ) != 0) return false;
  const auto journal = dir / "journal.ndjson";
  int status = 0;
  while (true) {
    if (waitpid(pid, &status, WNOHANG) == pid) return false;
    if (journal_lines(journal) >= target) break;
    std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
  kill(pid, SIGKILL);
  waitpid(pid, &status, 0);
  return WIFSIGNALED(status);
}

Verdict crash_safety(const fs::path& self) {
  const auto root = fs::temp_directory_path() / ("biasprobe-acceptance-" + std::to_string(getpid()));
  fs::remove_all(root);
  child_run(root / "oracle", 4);
  const auto oracle = final_counts(root / "oracle");

  std::mt19937 rng(20240611);
  std::string detail;
  bool ok = oracle != "incomplete";
  for (int concurrency : {1, 4, 16}) {
    const auto dir = root / ("c" + std::to_string(concurrency));
    std::set<std::size_t> points;
    while (points.size() < 3) points.insert(50 + rng() % 900);
    int kills = 0;
    for (const auto p : points) kills += kill_at(self, dir, concurrency, p);
    child_run(dir, concurrency);
    const bool same = final_counts(dir) == oracle;
    ok = ok && same && kills == 3;
    std::string pts;
    for (auto p : points) pts += (pts.empty() ? "" : "/") + std::to_string(p);
    detail += (detail.empty() ? "" : "; ") + std::string("c=") + std::to_string(concurrency) + " killed at " + pts +
              " (" + std::to_string(kills) + "/3), counts " + (same ? "identical" : "DIFFER");
  }
  fs::remove_all(root);
  return {ok, detail};
}

Verdict figure_filter() {
  const auto& sd = published_models().at(0).table;
  const FilterSpec spec{9, {"person"}, false};
  const auto filtered = apply_filter(sd, spec);
  const auto data = chart_data(sd, spec);
  std::vector<std::string> chart;
  for (const auto& c : data.at("categories")) chart.push_back(c.get<std::string>());
  auto expected = filtered.categories;
  std::sort(chart.begin(), chart.end());
  std::sort(expected.begin(), expected.end());
  const bool bicycle = filtered.find("bicycle").has_value() && sd.column_total(*sd.find("bicycle")) == 9;
  const bool truck_gone = !filtered.find("truck") && sd.column_total(*sd.find("truck")) == 5;
  const bool ok = bicycle && truck_gone && chart == expected && !filtered.find("person");
  return {ok, std::to_string(filtered.size()) + " categories kept, bicycle(9) " + (bicycle ? "kept" : "MISSING") +
                  ", truck(5) " + (truck_gone ? "removed" : "PRESENT") + ", chart " +
                  (chart == expected ? "matches" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc == 4 && std::string(argv[1]) == "--child-run") return child_run(argv[2], std::stoi(argv[3]));

  const fs::path self = fs::canonical("/proc/self/exe");
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"chi-squared-oracle", chi_squared_oracle},
      {"special-functions", special_functions},
      {"reproduce-paper", reproduction},
      {"plan-arithmetic", plan_arithmetic},
      {"null-calibration", [] { return simulation(Scenario::null, 500); }},
      {"power-biased", [] { return simulation(Scenario::biased, 100); }},
      {"crash-safe-determinism", [&] { return crash_safety(self); }},
      {"figure-filter", figure_filter},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

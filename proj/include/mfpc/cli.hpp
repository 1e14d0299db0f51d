#ifndef MFPC_CLI_HPP
#define MFPC_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfpc/bench.hpp"
#include "mfpc/learner.hpp"
#include "mfpc/metrics.hpp"

namespace mfpc {

inline constexpr const char* kVersion = "0.3.0";

/// Bad flags or config keys; maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AppConfig {
  std::size_t leaf_threshold = 16;
  double c = 1.0;
  WildcardPolicy wildcard_policy = WildcardPolicy::Exclude;
  DepthMode depth_mode = DepthMode::Max;
  std::size_t baseline_max_depth = 100;
  double baseline_space_factor = 4.0;
  std::size_t baseline_max_nodes = 50000;
  RulesetFormat format = RulesetFormat::Native;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  /// Learner and environment knobs; leaf_threshold, c, depth_mode, seed and
  /// workers above are copied in by train_config().
  TrainConfig train;

  /// Throws UsageError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// key=value lines, '#' comments, blank lines ignored.
  void load_file(const std::string& path);
  /// Every key in a fixed order, as key=value.
  std::vector<std::string> echo() const;
  TrainConfig train_config() const;
  EngineConfig engine_config() const;
};

/// Entry point of the mfpc binary. Exit codes: 0 ok, 1 usage, 2 data error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfpc

#endif  // MFPC_CLI_HPP

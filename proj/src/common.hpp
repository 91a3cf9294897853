#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ilmt {

// Error taxonomy. The C API and the CLI map these onto numeric codes, so
// every failure inside the core must surface as one of them.
struct data_error : std::runtime_error {
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct io_error : std::runtime_error {
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct divergence_error : std::runtime_error {
  explicit divergence_error(const std::string& msg) : std::runtime_error(msg) {}
};

// std::invalid_argument is used for caller mistakes (usage errors).

// Deterministic RNG. mt19937_64 has a standard-defined sequence; the
// distribution helpers are hand-rolled because the <random> distributions
// are implementation-defined and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform in [0, n). Modulo bias is ~n/2^64, irrelevant at our scales.
  std::uint64_t below(std::uint64_t n) { return n ? gen_() % n : 0; }

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64, used to derive independent sub-seeds from a run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Shortest decimal string that parses back to exactly the same double;
// config files rendered with it reproduce the configuration bit-for-bit.
std::string double_repr(double v);

// FNV-1a 64-bit, used for config hashes in run manifests.
std::uint64_t fnv1a64(std::string_view text);

std::vector<std::string> split_ws(std::string_view line);
std::vector<std::string> split_char(std::string_view line, char sep);
std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);
std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

// Splits a UTF-8 string into code points (as byte strings). Invalid bytes
// are passed through one at a time.
std::vector<std::string> utf8_chars(std::string_view word);

// Line-oriented "key = value" configuration text; '#' starts a comment,
// blank lines are skipped, nested keys are dotted, later keys override.
using KvMap = std::map<std::string, std::string>;
KvMap parse_kv(const std::string& text, const std::string& source_name = "<config>");
std::string render_kv(const KvMap& kv);

// Typed reads with defaults; malformed values raise data_error naming the key.
std::string kv_str(const KvMap& kv, const std::string& key, const std::string& fallback);
long long kv_int(const KvMap& kv, const std::string& key, long long fallback);
double kv_double(const KvMap& kv, const std::string& key, double fallback);
bool kv_bool(const KvMap& kv, const std::string& key, bool fallback);

std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace ilmt

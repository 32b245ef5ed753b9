#include "linprobit/random.hpp"

#include <cmath>
#include <vector>

#include "linprobit/specfun.hpp"

namespace linprobit {

namespace {

std::mt19937_64 seeded_engine(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * key.size());
  for (std::uint64_t k : key) {
    words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(seeded_engine({seed})) {}

Rng::Rng(std::initializer_list<std::uint64_t> key) : engine_(seeded_engine(key)) {}

double Rng::uniform() {
  // (k + 0.5) / 2^53 never hits 0 or 1.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() { return norm_cdf_inv(uniform()); }

double Rng::truncated_unit_normal(double mean, bool positive) {
  // z = mean - s*X with s = -1 for the positive side and X ~ N(0,1) restricted
  // to (-inf, s*mean); X is drawn as Phi^{-1}(u * Phi(bound)), in log space
  // once the bound reaches the tails.
  const double bound = positive ? mean : -mean;
  const double x = std::abs(bound) <= 8.0
                       ? norm_cdf_inv(uniform() * norm_cdf(bound))
                       : norm_cdf_inv_log(std::log(uniform()) + log_norm_cdf(bound));
  return positive ? mean - x : mean + x;
}

}  // namespace linprobit

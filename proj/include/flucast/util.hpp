#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace flucast {

// splitmix64 step; the standard finalizer used for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed, a stream tag and
// indices. Parallel tasks each seed their own engine with one of these so
// results do not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0);

inline std::mt19937_64 make_engine(std::uint64_t seed) { return std::mt19937_64(seed); }

// Uniform integer in [0, n). n must be > 0.
std::uint64_t uniform_index(std::mt19937_64& eng, std::uint64_t n);

// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle_vector(std::vector<T>& v, std::mt19937_64& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_index(eng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Shortest round-trip decimal representation; used everywhere a double is
// written to a file so outputs are byte-stable.
std::string format_double(double value);

double mean(const std::vector<double>& v);
double sample_variance(const std::vector<double>& v);  // denominator n-1
double pearson(const std::vector<double>& x, const std::vector<double>& y);
double median_of_sorted(std::vector<double> v);  // sorts its copy

// Proleptic Gregorian days since 1970-01-01.
long long days_from_civil(int y, int m, int d);
void civil_from_days(long long days, int& y, int& m, int& d);
std::string iso_date(long long days);

}  // namespace flucast

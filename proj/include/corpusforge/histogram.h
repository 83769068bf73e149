#pragma once

#include <json.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace corpusforge {

struct HistogramSpec {
  double min = 0.0;
  double max = 2.0;
  std::size_t bins = 40;
};

// Fixed-bin histogram with summary statistics. Bin i covers
// [min + i*w, min + (i+1)*w); the last bin also takes values equal to max.
// Values outside [min, max] are clamped into the edge bins and counted in
// `clamped`. stddev is the population standard deviation.
struct Histogram {
  HistogramSpec spec;
  std::vector<std::size_t> counts;
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t clamped = 0;

  static Histogram build(std::span<const double> values, const HistogramSpec& spec);

  double bin_left(std::size_t i) const;
  double bin_right(std::size_t i) const;

  // "bin_left,bin_right,count" header plus one row per bin.
  std::string to_csv() const;

  nlohmann::ordered_json summary_json() const;
};

// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace corpusforge

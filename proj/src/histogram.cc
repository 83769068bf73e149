#include "corpusforge/histogram.h"

#include <charconv>
#include <cmath>

#include "corpusforge/errors.h"

namespace corpusforge {

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

Histogram Histogram::build(std::span<const double> values, const HistogramSpec& spec) {
  if (spec.bins == 0 || !(spec.max > spec.min)) {
    throw ConfigError("histogram needs bins >= 1 and max > min");
  }
  Histogram h;
  h.spec = spec;
  h.counts.assign(spec.bins, 0);
  h.n = values.size();

  const double range = spec.max - spec.min;
  double sum = 0.0;
  for (double v : values) {
    sum += v;
    const double scaled = (v - spec.min) * static_cast<double>(spec.bins) / range;
    std::size_t bin = 0;
    if (v < spec.min) {
      ++h.clamped;
    } else if (v > spec.max) {
      ++h.clamped;
      bin = spec.bins - 1;
    } else {
      bin = std::min(static_cast<std::size_t>(std::floor(scaled)), spec.bins - 1);
    }
    ++h.counts[bin];
  }
  if (h.n > 0) {
    h.mean = sum / static_cast<double>(h.n);
    double squares = 0.0;
    for (double v : values) squares += (v - h.mean) * (v - h.mean);
    h.stddev = std::sqrt(squares / static_cast<double>(h.n));
  }
  return h;
}

double Histogram::bin_left(std::size_t i) const {
  return spec.min + (spec.max - spec.min) * static_cast<double>(i) / static_cast<double>(spec.bins);
}

double Histogram::bin_right(std::size_t i) const {
  return i + 1 == spec.bins ? spec.max : bin_left(i + 1);
}

std::string Histogram::to_csv() const {
  std::string out = "bin_left,bin_right,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out += format_double(bin_left(i)) + "," + format_double(bin_right(i)) + "," +
           std::to_string(counts[i]) + "\n";
  }
  return out;
}

nlohmann::ordered_json Histogram::summary_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["mean"] = mean;
  j["stddev"] = stddev;
  j["clamped"] = clamped;
  j["min"] = spec.min;
  j["max"] = spec.max;
  j["bins"] = spec.bins;
  j["counts"] = counts;
  return j;
}

}  // namespace corpusforge

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "panoma/config.hpp"

namespace panoma {

enum class RateMode { noma, oma };

// Per-slot rate summary.
//   order              decoding order, original user indices, strongest first
//   per_user_rate      indexed like the inputs handed to the producer
//   ee_bpshz_per_w     filled by ee_value / rate_report, zero otherwise
struct RateReport {
  std::vector<int> order;
  std::vector<double> per_user_rate_bpshz;
  double sum_rate_bpshz = 0.0;
  double ee_bpshz_per_w = 0.0;
};

inline std::vector<int> sic_order_sq(const std::vector<double>& gain_sq) {
  if (gain_sq.empty()) throw std::domain_error("sic_order: no users");
  std::vector<int> order(gain_sq.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (gain_sq[static_cast<std::size_t>(a)] != gain_sq[static_cast<std::size_t>(b)])
      return gain_sq[static_cast<std::size_t>(a)] > gain_sq[static_cast<std::size_t>(b)];
    return a < b;  // deterministic tie-break: lower index decodes first
  });
  return order;
}

inline std::vector<int> sic_order(const std::vector<std::complex<double>>& gains) {
  std::vector<double> sq;
  sq.reserve(gains.size());
  for (const auto& g : gains) sq.push_back(std::norm(g));
  return sic_order_sq(sq);
}

namespace detail {

inline void check_rate_inputs(const std::vector<double>& powers_w,
                              const std::vector<double>& gain_sq, double sigma2_w, double beta) {
  if (powers_w.size() != gain_sq.size() || powers_w.empty())
    throw std::domain_error("rates: powers and gains must have equal nonzero length");
  for (double p : powers_w)
    if (p < 0.0) throw std::domain_error("rates: negative transmit power");
  if (!(sigma2_w > 0.0)) throw std::domain_error("rates: noise power must be positive");
  if (beta < 0.0 || beta > 1.0) throw std::domain_error("rates: beta outside [0, 1]");
}

}  // namespace detail

// Uplink rates under successive cancellation. Inputs must already be in
// decoding order (index 0 strongest); later entries interfere with earlier
// ones.
inline RateReport noma_rates(const std::vector<double>& powers_w,
                             const std::vector<double>& gain_sq, double sigma2_w, double beta) {
  detail::check_rate_inputs(powers_w, gain_sq, sigma2_w, beta);
  const std::size_t k = powers_w.size();
  RateReport report;
  report.order.resize(k);
  std::iota(report.order.begin(), report.order.end(), 0);
  report.per_user_rate_bpshz.resize(k);
  double interference = 0.0;
  for (std::size_t i = k; i-- > 0;) {
    const double signal = powers_w[i] * gain_sq[i];
    report.per_user_rate_bpshz[i] =
        (1.0 - beta) * std::log2(1.0 + signal / (interference + sigma2_w));
    interference += signal;
  }
  report.sum_rate_bpshz = std::accumulate(report.per_user_rate_bpshz.begin(),
                                          report.per_user_rate_bpshz.end(), 0.0);
  return report;
}

inline RateReport noma_rates(const std::vector<double>& powers_w,
                             const std::vector<std::complex<double>>& gains, double sigma2_w,
                             double beta) {
  std::vector<double> sq;
  sq.reserve(gains.size());
  for (const auto& g : gains) sq.push_back(std::norm(g));
  return noma_rates(powers_w, sq, sigma2_w, beta);
}

// Orthogonal benchmark: the uplink fraction is split evenly, one user at a
// time, so there is no interference term.
inline RateReport oma_rates(const std::vector<double>& powers_w,
                            const std::vector<double>& gain_sq, double sigma2_w, double beta) {
  detail::check_rate_inputs(powers_w, gain_sq, sigma2_w, beta);
  const std::size_t k = powers_w.size();
  RateReport report;
  report.order.resize(k);
  std::iota(report.order.begin(), report.order.end(), 0);
  report.per_user_rate_bpshz.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    report.per_user_rate_bpshz[i] = (1.0 - beta) / static_cast<double>(k) *
                                    std::log2(1.0 + powers_w[i] * gain_sq[i] / sigma2_w);
  }
  report.sum_rate_bpshz = std::accumulate(report.per_user_rate_bpshz.begin(),
                                          report.per_user_rate_bpshz.end(), 0.0);
  return report;
}

inline RateReport oma_rates(const std::vector<double>& powers_w,
                            const std::vector<std::complex<double>>& gains, double sigma2_w,
                            double beta) {
  std::vector<double> sq;
  sq.reserve(gains.size());
  for (const auto& g : gains) sq.push_back(std::norm(g));
  return oma_rates(powers_w, sq, sigma2_w, beta);
}

inline double ee_value(const RateReport& rates, const std::vector<double>& powers_w,
                       double fixed_power_w) {
  if (!(fixed_power_w > 0.0)) throw std::domain_error("ee_value: fixed power must be positive");
  const double total_power =
      fixed_power_w + std::accumulate(powers_w.begin(), powers_w.end(), 0.0);
  return rates.sum_rate_bpshz / total_power;
}

// Full per-slot report from original-index inputs: computes the decoding
// order, applies the rate law in that order, and maps rates back to the
// original user indexing.
inline RateReport rate_report(const std::vector<double>& powers_w,
                              const std::vector<std::complex<double>>& gains, double sigma2_w,
                              double beta, RateMode mode, double fixed_power_w) {
  std::vector<double> sq;
  sq.reserve(gains.size());
  for (const auto& g : gains) sq.push_back(std::norm(g));
  const std::vector<int> order = sic_order_sq(sq);
  std::vector<double> p_sorted(order.size()), g_sorted(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    p_sorted[i] = powers_w[static_cast<std::size_t>(order[i])];
    g_sorted[i] = sq[static_cast<std::size_t>(order[i])];
  }
  RateReport sorted = mode == RateMode::noma ? noma_rates(p_sorted, g_sorted, sigma2_w, beta)
                                             : oma_rates(p_sorted, g_sorted, sigma2_w, beta);
  RateReport report;
  report.order = order;
  report.per_user_rate_bpshz.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    report.per_user_rate_bpshz[static_cast<std::size_t>(order[i])] = sorted.per_user_rate_bpshz[i];
  report.sum_rate_bpshz = sorted.sum_rate_bpshz;
  report.ee_bpshz_per_w = ee_value(report, powers_w, fixed_power_w);
  return report;
}

}  // namespace panoma

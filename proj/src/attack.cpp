#include "dcmg/attack.hpp"

#include "dcmg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace dcmg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double to_unit_open(std::uint64_t bits) {
  // 53 random bits mapped into (0, 1)
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

void AttackSpec::validate() const {
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto& ch = channels[i];
    const std::string where = "attack channel " + std::to_string(i);
    if (ch.exp_rate < 0.0) throw InputError(where + ": growth rate must be >= 0");
    if (ch.noise_std < 0.0) throw InputError(where + ": noise std must be >= 0");
    if (ch.start < 0.0) throw InputError(where + ": start time must be >= 0");
  }
  if (!(noise_hold > 0.0)) throw InputError("attack noise hold interval must be positive");
}

AttackSpec AttackSpec::none(std::size_t n_channels) {
  AttackSpec s;
  s.channels.resize(n_channels);
  return s;
}

AttackSpec AttackSpec::constant(std::size_t n_channels, double bias, double start) {
  AttackSpec s = none(n_channels);
  for (auto& ch : s.channels) {
    ch.kind = AttackKind::Constant;
    ch.constant = bias;
    ch.start = start;
  }
  return s;
}

AttackSpec AttackSpec::polynomial(std::size_t n_channels, double start) {
  static constexpr double kSlopes[] = {0.2, 0.15, 0.1};
  AttackSpec s = none(n_channels);
  for (std::size_t i = 0; i < n_channels; ++i) {
    auto& ch = s.channels[i];
    ch.kind = AttackKind::Polynomial;
    ch.poly_offset = 1.0;
    ch.poly_slope = 5.0 * kSlopes[std::min<std::size_t>(i, 2)];
    ch.start = start;
  }
  return s;
}

AttackSpec AttackSpec::exponential(double sigma, std::uint64_t seed) {
  AttackSpec s = none(3);
  s.seed = seed;
  const double params[3][5] = {
      {0.15, 2.0, 4.0, 0.3, 10.0},
      {0.15, 5.0, 5.0, 0.4, 12.0},
      {0.10, 3.0, 10.0, 0.2, 14.0},
  };
  for (std::size_t i = 0; i < 3; ++i) {
    auto& ch = s.channels[i];
    ch.kind = AttackKind::Exponential;
    ch.exp_scale = params[i][0];
    ch.exp_offset = params[i][1];
    ch.exp_gain = params[i][2];
    ch.exp_rate = params[i][3];
    ch.start = params[i][4];
    ch.noise_std = sigma;
  }
  return s;
}

double deterministic_attack(const ChannelAttack& ch, double t, bool polynomial_absolute_time) {
  if (ch.kind == AttackKind::None || t < ch.start) return 0.0;
  switch (ch.kind) {
    case AttackKind::Constant:
      return ch.constant;
    case AttackKind::Polynomial: {
      const double arg = polynomial_absolute_time ? t : t - ch.start;
      return ch.poly_offset + ch.poly_slope * arg;
    }
    case AttackKind::Exponential:
      return ch.exp_scale * (ch.exp_offset + ch.exp_gain * std::exp(ch.exp_rate * (t - ch.start)));
    case AttackKind::None:
      break;
  }
  return 0.0;
}

double noise_sample(std::uint64_t seed, std::size_t channel, std::uint64_t slot) {
  const std::uint64_t key = splitmix64(seed ^ splitmix64(channel + 0x51ed2701ULL)) ^ slot;
  const std::uint64_t a = splitmix64(key);
  const std::uint64_t b = splitmix64(a);
  // Box-Muller
  const double u1 = to_unit_open(a);
  const double u2 = to_unit_open(b);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> attack_noise(const AttackSpec& spec, double t) {
  std::vector<double> noise(spec.channels.size(), 0.0);
  // A tiny offset keeps slot boundaries stable against rounding of t = n*h.
  const auto slot = static_cast<std::uint64_t>(std::floor(t / spec.noise_hold + 1e-9));
  for (std::size_t i = 0; i < spec.channels.size(); ++i) {
    const auto& ch = spec.channels[i];
    if (ch.kind == AttackKind::None || t < ch.start || ch.noise_std == 0.0) continue;
    noise[i] = ch.noise_std * noise_sample(spec.seed, i, slot);
  }
  return noise;
}

std::vector<double> evaluate_attack(const AttackSpec& spec, double t) {
  std::vector<double> delta = attack_noise(spec, t);
  for (std::size_t i = 0; i < spec.channels.size(); ++i) {
    delta[i] += deterministic_attack(spec.channels[i], t, spec.polynomial_absolute_time);
  }
  return delta;
}

EnvelopeReport envelope_check(const AttackSpec& spec, double horizon, double gamma, double kappa,
                              std::size_t n_samples) {
  if (!(gamma > 0.0) || kappa < 0.0) throw InputError("envelope needs gamma > 0 and kappa >= 0");
  EnvelopeReport rep;
  const std::size_t n = std::max<std::size_t>(n_samples, 2);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = horizon * static_cast<double>(k) / static_cast<double>(n - 1);
    double norm2 = 0.0;
    for (const auto& ch : spec.channels) {
      const double d = deterministic_attack(ch, t, spec.polynomial_absolute_time);
      norm2 += d * d;
    }
    const double ratio = std::sqrt(norm2) / (gamma * std::exp(kappa * t));
    if (ratio > rep.worst_ratio) {
      rep.worst_ratio = ratio;
      rep.worst_time = t;
    }
  }
  rep.pass = rep.worst_ratio <= 1.0;
  return rep;
}

}  // namespace dcmg

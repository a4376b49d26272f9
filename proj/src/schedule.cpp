// SPDX-License-Identifier: Apache-2.0
#include "maskrate/schedule.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace maskrate {

ScheduleSpec constant_schedule(double rate, std::int64_t total_steps) {
  return {ScheduleKind::constant, rate, rate, {}, 1.0, total_steps};
}

ScheduleSpec linear_schedule(double p_initial, double p_final, std::int64_t total_steps) {
  return {ScheduleKind::linear, p_initial, p_final, {}, 1.0, total_steps};
}

ScheduleSpec cosine_schedule(double p_initial, double p_final, std::int64_t total_steps) {
  return {ScheduleKind::cosine, p_initial, p_final, {}, 1.0, total_steps};
}

ScheduleSpec halfway_step_schedule(double p_initial, double p_final, std::int64_t total_steps) {
  const double gamma = p_initial == 0.0 ? 1.0 : p_final / p_initial;
  return {ScheduleKind::step, p_initial, p_final, {total_steps / 2}, gamma, total_steps};
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::cosine: return "cosine";
    case ScheduleKind::step: return "step";
  }
  return "unknown";
}

std::optional<std::string> validate(const ScheduleSpec& spec) {
  auto in_unit = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  if (!in_unit(spec.p_initial) || !in_unit(spec.p_final)) return "rate out of [0,1]";
  if (spec.total_steps < 1) return "total_steps must be >= 1";
  switch (spec.kind) {
    case ScheduleKind::constant:
      if (spec.p_initial != spec.p_final) return "constant requires p_i == p_f";
      break;
    case ScheduleKind::linear:
    case ScheduleKind::cosine:
      break;
    case ScheduleKind::step: {
      if (!(spec.gamma > 0.0 && spec.gamma <= 1.0)) return "gamma out of (0,1]";
      for (std::size_t i = 0; i < spec.decay_steps.size(); ++i) {
        const auto s = spec.decay_steps[i];
        if (s < 0 || s >= spec.total_steps) return "decay step out of [0, total_steps)";
        if (i > 0 && s <= spec.decay_steps[i - 1]) return "decay steps must be strictly increasing";
      }
      const double reached =
          spec.p_initial * std::pow(spec.gamma, static_cast<double>(spec.decay_steps.size()));
      if (std::abs(reached - spec.p_final) > 1e-12) {
        return "step requires p_f == p_i * gamma^|decay_steps|";
      }
      break;
    }
  }
  return std::nullopt;
}

double masking_rate(const ScheduleSpec& spec, std::int64_t t) {
  if (auto diag = validate(spec)) throw std::invalid_argument(*diag);
  if (t < 0 || t > spec.total_steps) throw std::out_of_range("step out of range");

  const double frac = static_cast<double>(t) / static_cast<double>(spec.total_steps);
  switch (spec.kind) {
    case ScheduleKind::constant:
      return spec.p_initial;
    case ScheduleKind::linear:
      return spec.p_initial + frac * (spec.p_final - spec.p_initial);
    case ScheduleKind::cosine:
      return spec.p_initial +
             (spec.p_final - spec.p_initial) / 2.0 * (1.0 + std::cos((1.0 - frac) * std::numbers::pi));
    case ScheduleKind::step: {
      double rate = spec.p_initial;
      for (auto s : spec.decay_steps) {
        if (s <= t) rate *= spec.gamma;
      }
      return rate;
    }
  }
  return spec.p_initial;
}

std::string schedule_name(const ScheduleSpec& spec) {
  if (spec.kind == ScheduleKind::constant) return fmt::format("constant-{}", spec.p_initial);
  return fmt::format("{}-{}-{}", to_string(spec.kind), spec.p_initial, spec.p_final);
}

namespace {

double parse_rate(std::string_view text, std::string_view whole) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument(fmt::format("malformed schedule '{}': bad rate '{}'", whole, text));
  }
  return v;
}

std::vector<std::string_view> split_dash(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find('-', start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

ScheduleSpec parse_schedule(std::string_view name, std::int64_t total_steps) {
  const auto parts = split_dash(name);
  const auto& kind = parts.front();
  ScheduleSpec spec;
  if (kind == "constant") {
    if (parts.size() != 2) {
      throw std::invalid_argument(fmt::format("malformed schedule '{}': expected constant-<p>", name));
    }
    spec = constant_schedule(parse_rate(parts[1], name), total_steps);
  } else if (kind == "linear" || kind == "cosine" || kind == "step") {
    if (parts.size() != 3) {
      throw std::invalid_argument(
          fmt::format("malformed schedule '{}': expected {}-<p_i>-<p_f>", name, kind));
    }
    const double pi = parse_rate(parts[1], name);
    const double pf = parse_rate(parts[2], name);
    if (kind == "linear") spec = linear_schedule(pi, pf, total_steps);
    else if (kind == "cosine") spec = cosine_schedule(pi, pf, total_steps);
    else spec = halfway_step_schedule(pi, pf, total_steps);
  } else {
    throw std::invalid_argument(fmt::format("malformed schedule '{}': unknown kind '{}'", name, kind));
  }
  if (auto diag = validate(spec)) {
    throw std::invalid_argument(fmt::format("invalid schedule '{}': {}", name, *diag));
  }
  return spec;
}

}  // namespace maskrate

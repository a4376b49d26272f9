// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace maskrate {

enum class ScheduleKind { constant, linear, cosine, step };

/// A masking-rate schedule over the steps [0, total_steps].
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::constant;
  double p_initial = 0.15;
  double p_final = 0.15;
  std::vector<std::int64_t> decay_steps;  // step kind only; sorted, unique
  double gamma = 1.0;                     // step kind only
  std::int64_t total_steps = 1;

  friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

ScheduleSpec constant_schedule(double rate, std::int64_t total_steps);
ScheduleSpec linear_schedule(double p_initial, double p_final, std::int64_t total_steps);
ScheduleSpec cosine_schedule(double p_initial, double p_final, std::int64_t total_steps);
/// Single decay at floor(total_steps / 2) with gamma = p_final / p_initial.
ScheduleSpec halfway_step_schedule(double p_initial, double p_final, std::int64_t total_steps);

/// std::nullopt when every invariant holds, otherwise a diagnostic.
std::optional<std::string> validate(const ScheduleSpec& spec);

/// Rate at step t. Throws std::out_of_range for t outside [0, total_steps]
/// and std::invalid_argument for an invalid spec.
double masking_rate(const ScheduleSpec& spec, std::int64_t t);

/// "constant-0.15", "linear-0.3-0.15", "cosine-0.3-0.15", "step-0.3-0.15".
/// Step schedules are named by their endpoints, so only the halfway form
/// round-trips through parse_schedule.
std::string schedule_name(const ScheduleSpec& spec);

/// Inverse of schedule_name. Throws std::invalid_argument on malformed input.
ScheduleSpec parse_schedule(std::string_view name, std::int64_t total_steps);

std::string_view to_string(ScheduleKind kind);

}  // namespace maskrate

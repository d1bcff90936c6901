#pragma once

namespace ofotune {

inline constexpr double kPascalPerBar = 1e5;

constexpr double bar_to_pa(double bar) { return bar * kPascalPerBar; }
constexpr double pa_to_bar(double pa) { return pa / kPascalPerBar; }

}  // namespace ofotune

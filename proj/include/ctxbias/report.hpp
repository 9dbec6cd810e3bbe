#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "ctxbias/experiment.hpp"

namespace ctxbias {

// Two blocks, each with its own header line:
//
//   dataset,noise,trial,context_accuracy,baseline_accuracy
//   <one row per noise level and trial>
//   noise,mean,ci_low,ci_high
//   <one row per noise level, context model>
//
// Numbers use the shortest representation that round-trips exactly, so the
// text is a pure function of the result.
std::string format_csv(const SweepResult& result);
SweepResult parse_csv(std::string_view text);

void write_csv(const SweepResult& result, const std::filesystem::path& path);
SweepResult read_csv(const std::filesystem::path& path);

// Accuracy against noise: context mean as a polyline over a shaded CI band,
// the baseline as a horizontal polyline over its own band.
std::string format_svg(const SweepResult& result);
void render_svg(const SweepResult& result, const std::filesystem::path& path);

// Shortest round-trip decimal form of v.
std::string format_number(double v);

}  // namespace ctxbias

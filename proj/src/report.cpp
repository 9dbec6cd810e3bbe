#include "ctxbias/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "ctxbias/error.hpp"

namespace ctxbias {

namespace {

constexpr std::string_view kTrialHeader = "dataset,noise,trial,context_accuracy,baseline_accuracy";
constexpr std::string_view kSummaryHeader = "noise,mean,ci_low,ci_high";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(ParseErrorKind::bad_value, "csv line " + std::to_string(line_no) +
                                                    ": '" + std::string(field) + "' is not a number");
  }
  return v;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed on " + path.string());
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_number: conversion failed");
  return std::string(buf, ptr);
}

std::string format_csv(const SweepResult& result) {
  std::string out;
  out += kTrialHeader;
  out += '\n';
  for (std::size_t k = 0; k < result.noise_grid.size(); ++k) {
    for (std::size_t t = 0; t < result.trials(); ++t) {
      out += result.dataset + ',' + format_number(result.noise_grid[k]) + ',' +
             std::to_string(t) + ',' + format_number(result.context_accuracy[k][t]) + ',' +
             format_number(result.baseline_accuracy[t]) + '\n';
    }
  }
  out += kSummaryHeader;
  out += '\n';
  for (const NoiseSummary& s : result.summary) {
    out += format_number(s.noise) + ',' + format_number(s.mean) + ',' + format_number(s.ci_low()) +
           ',' + format_number(s.ci_high()) + '\n';
  }
  return out;
}

SweepResult parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != kTrialHeader) {
    throw ParseError(ParseErrorKind::bad_magic, "csv: missing header '" + std::string(kTrialHeader) + "'");
  }
  SweepResult result;
  bool in_summary = false;
  std::size_t max_trial = 0;
  struct Row {
    double noise;
    std::size_t trial;
    double context;
    double baseline;
  };
  std::vector<Row> rows;
  while (next_line()) {
    if (line.empty()) continue;
    if (line == kSummaryHeader) {
      in_summary = true;
      continue;
    }
    const auto fields = split_fields(line);
    if (in_summary) {
      // Aggregates are recomputed from the trials; only check they parse.
      if (fields.size() != 4) {
        throw ParseError(ParseErrorKind::bad_value, "csv line " + std::to_string(line_no) + ": expected 4 fields");
      }
      for (auto f : fields) parse_double(f, line_no);
      continue;
    }
    // The dataset name may itself contain commas (ctxf:TRAIN,TEST); the four
    // numeric fields are taken from the right.
    if (fields.size() < 5) {
      throw ParseError(ParseErrorKind::bad_value, "csv line " + std::to_string(line_no) + ": expected 5 fields");
    }
    const std::size_t m = fields.size() - 4;
    const std::string_view name(fields[0].data(), fields[m - 1].data() + fields[m - 1].size() - fields[0].data());
    result.dataset = std::string(name);
    Row r{parse_double(fields[m], line_no), static_cast<std::size_t>(parse_double(fields[m + 1], line_no)),
          parse_double(fields[m + 2], line_no), parse_double(fields[m + 3], line_no)};
    max_trial = std::max(max_trial, r.trial);
    rows.push_back(r);
  }
  if (rows.empty()) return result;

  const std::size_t trials = max_trial + 1;
  result.baseline_accuracy.assign(trials, 0.0);
  for (const Row& r : rows) {
    auto it = std::find(result.noise_grid.begin(), result.noise_grid.end(), r.noise);
    std::size_t k = static_cast<std::size_t>(it - result.noise_grid.begin());
    if (it == result.noise_grid.end()) {
      result.noise_grid.push_back(r.noise);
      result.context_accuracy.emplace_back(trials, 0.0);
    }
    result.context_accuracy[k][r.trial] = r.context;
    result.baseline_accuracy[r.trial] = r.baseline;
  }
  result.summarize();
  return result;
}

void write_csv(const SweepResult& result, const std::filesystem::path& path) {
  write_text(path, format_csv(result));
}

SweepResult read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

std::string format_svg(const SweepResult& result) {
  constexpr double width = 640, height = 420;
  constexpr double left = 70, right = 20, top = 40, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double x_max = 0.0;
  for (double p : result.noise_grid) x_max = std::max(x_max, p);
  if (x_max <= 0.0) x_max = 1.0;

  double y_lo = 1.0, y_hi = 0.0;
  auto widen = [&](double lo, double hi) {
    y_lo = std::min(y_lo, lo);
    y_hi = std::max(y_hi, hi);
  };
  for (const auto& s : result.summary) widen(s.ci_low(), s.ci_high());
  if (!result.baseline_accuracy.empty()) widen(result.baseline.ci_low(), result.baseline.ci_high());
  if (y_lo > y_hi) {
    y_lo = 0.0;
    y_hi = 1.0;
  }
  const double pad = std::max(0.01, 0.1 * (y_hi - y_lo));
  y_lo = std::max(0.0, y_lo - pad);
  y_hi = std::min(1.0, y_hi + pad);
  if (y_hi <= y_lo) y_hi = y_lo + 0.01;

  auto sx = [&](double p) { return left + plot_w * p / x_max; };
  auto sy = [&](double a) { return top + plot_h * (1.0 - (a - y_lo) / (y_hi - y_lo)); };
  auto point = [&](double p, double a) { return fixed(sx(p)) + "," + fixed(sy(a)); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n"
      << "  <text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << "Test accuracy vs context noise (" << result.dataset << ", n="
      << result.trials() << " trials, 95% CI)</text>\n";

  // Axes and ticks.
  svg << "  <g stroke=\"black\" stroke-width=\"1\">\n"
      << "    <line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\"/>\n"
      << "    <line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\"/>\n"
      << "  </g>\n";
  svg << "  <g font-size=\"11\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double p = x_max * i / 5.0;
    svg << "    <text x=\"" << fixed(sx(p)) << "\" y=\"" << top + plot_h + 16
        << "\" text-anchor=\"middle\">" << fixed(p) << "</text>\n";
    const double a = y_lo + (y_hi - y_lo) * i / 5.0;
    svg << "    <text x=\"" << left - 6 << "\" y=\"" << fixed(sy(a) + 4)
        << "\" text-anchor=\"end\">" << fixed(a, 3) << "</text>\n";
  }
  svg << "  </g>\n"
      << "  <text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 18
      << "\" text-anchor=\"middle\" font-size=\"13\">context noise p</text>\n"
      << "  <text x=\"18\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" font-size=\"13\""
      << " transform=\"rotate(-90 18 " << top + plot_h / 2 << ")\">accuracy</text>\n";

  if (!result.baseline_accuracy.empty() && !result.noise_grid.empty()) {
    const double x0 = 0.0;
    const double x1 = x_max;
    const auto& b = result.baseline;
    svg << "  <polygon class=\"baseline-ci\" fill=\"#999999\" fill-opacity=\"0.25\" stroke=\"none\" points=\""
        << point(x0, b.ci_low()) << ' ' << point(x1, b.ci_low()) << ' ' << point(x1, b.ci_high())
        << ' ' << point(x0, b.ci_high()) << "\"/>\n";
    svg << "  <polyline class=\"baseline\" fill=\"none\" stroke=\"#444444\" stroke-width=\"2\""
        << " stroke-dasharray=\"6,4\" points=\"" << point(x0, b.mean) << ' ' << point(x1, b.mean)
        << "\"/>\n";
  }
  if (!result.summary.empty()) {
    std::string upper, lower;
    for (const auto& s : result.summary) upper += point(s.noise, s.ci_high()) + ' ';
    for (auto it = result.summary.rbegin(); it != result.summary.rend(); ++it) {
      lower += point(it->noise, it->ci_low()) + ' ';
    }
    svg << "  <polygon class=\"context-ci\" fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\" points=\""
        << upper << lower.substr(0, lower.size() - 1) << "\"/>\n";
    std::string means;
    for (const auto& s : result.summary) means += point(s.noise, s.mean) + ' ';
    means.pop_back();
    svg << "  <polyline class=\"context\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\""
        << means << "\"/>\n";
  }

  svg << "  <g font-size=\"12\">\n"
      << "    <line x1=\"" << left + plot_w - 150 << "\" y1=\"" << top + 12 << "\" x2=\""
      << left + plot_w - 120 << "\" y2=\"" << top + 12
      << "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n"
      << "    <text x=\"" << left + plot_w - 114 << "\" y=\"" << top + 16 << "\">with context</text>\n"
      << "    <line x1=\"" << left + plot_w - 150 << "\" y1=\"" << top + 30 << "\" x2=\""
      << left + plot_w - 120 << "\" y2=\"" << top + 30
      << "\" stroke=\"#444444\" stroke-width=\"2\" stroke-dasharray=\"6,4\"/>\n"
      << "    <text x=\"" << left + plot_w - 114 << "\" y=\"" << top + 34 << "\">no context</text>\n"
      << "  </g>\n"
      << "</svg>\n";
  return svg.str();
}

void render_svg(const SweepResult& result, const std::filesystem::path& path) {
  write_text(path, format_svg(result));
}

}  // namespace ctxbias

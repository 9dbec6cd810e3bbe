#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <functional>
#include <sstream>

#include "ctxbias/error.hpp"
#include "ctxbias/report.hpp"
#include "support.hpp"

namespace ctxbias {
namespace {

SweepResult sample_result() {
  SweepResult r;
  r.dataset = "fashion";
  r.noise_grid = {0.0, 0.1, 0.25};
  r.context_accuracy = {{0.9, 0.91, 0.905}, {0.88, 0.87, 0.871}, {0.8, 0.81, 0.1 + 0.2}};
  r.baseline_accuracy = {0.82, 0.83, 0.8250000000000001};
  r.summarize();
  return r;
}

TEST(Csv, RoundTripIsExact) {
  const SweepResult r = sample_result();
  const std::string text = format_csv(r);
  EXPECT_EQ(parse_csv(text), r);
  EXPECT_EQ(format_csv(parse_csv(text)), text);
}

TEST(Csv, DatasetNameMayContainCommas) {
  SweepResult r = sample_result();
  r.dataset = "ctxf:/data/a.ctxf,/data/b.ctxf";
  EXPECT_EQ(parse_csv(format_csv(r)), r);
}

TEST(Csv, FileRoundTrip) {
  testing::TempDir dir;
  const SweepResult r = sample_result();
  write_csv(r, dir / "sweep.csv");
  EXPECT_EQ(read_csv(dir / "sweep.csv"), r);
  EXPECT_THROW(read_csv(dir / "missing.csv"), IoError);
}

TEST(Csv, EmptyGridHasHeadersOnly) {
  SweepResult r;
  r.dataset = "fashion";
  const std::string text = format_csv(r);
  EXPECT_EQ(text, "dataset,noise,trial,context_accuracy,baseline_accuracy\nnoise,mean,ci_low,ci_high\n");
}

TEST(Csv, RejectsMalformedText) {
  EXPECT_THROW(parse_csv(""), ParseError);
  EXPECT_THROW(parse_csv("wrong,header\n"), ParseError);
  std::string text = format_csv(sample_result());
  text.replace(text.find("0.91"), 4, "abc");
  EXPECT_THROW(parse_csv(text), ParseError);
}

TEST(Number, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(0.1 + 0.2), "0.30000000000000004");
  EXPECT_EQ(format_number(1.0), "1");
}

TEST(Svg, WellFormedWithOnePolylinePerSeries) {
  const std::string svg = format_svg(sample_result());
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  ASSERT_NO_THROW(boost::property_tree::read_xml(in, tree));
  std::size_t polylines = 0;
  std::size_t polygons = 0;
  std::function<void(const boost::property_tree::ptree&)> walk = [&](const auto& node) {
    for (const auto& [name, child] : node) {
      if (name == "polyline") ++polylines;
      if (name == "polygon") ++polygons;
      walk(child);
    }
  };
  walk(tree);
  EXPECT_EQ(polylines, 2u);
  EXPECT_EQ(polygons, 2u);
}

TEST(Svg, DeterministicAndWritable) {
  testing::TempDir dir;
  const SweepResult r = sample_result();
  EXPECT_EQ(format_svg(r), format_svg(r));
  render_svg(r, dir / "plot.svg");
  EXPECT_TRUE(std::filesystem::exists(dir / "plot.svg"));
}

}  // namespace
}  // namespace ctxbias

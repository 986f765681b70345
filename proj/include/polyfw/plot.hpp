#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "polyfw/harness.hpp"

namespace polyfw {

struct PlotStats {
  long dropped_nonfinite = 0;  // points skipped because not finite/positive
};

// Renders median objective-vs-time curves with shaded interquartile bands as
// an SVG line chart: linear time axis, log10 objective axis, one colour per
// solver, legend on the right. The output is a pure function of the inputs
// (no timestamps), so re-rendering unchanged data is byte-identical.
PlotStats render_plot(const std::vector<AggregateCurve>& curves,
                      const std::filesystem::path& out_path,
                      const std::string& title);

}  // namespace polyfw

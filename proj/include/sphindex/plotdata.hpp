#pragma once

// Plot-ready long-format tables for the figure reproductions.

#include <string>
#include <vector>

#include "sphindex/experiments.hpp"

namespace sphindex {

enum class PlotKind { Boxplot, Barplot, Tradeoff };

PlotKind parse_plot_kind(const std::string& name);

// Logarithms of bias, MSE and MSPE, one row per result row.
std::string boxplot_csv(const std::vector<ResultRow>& rows, const RunMetadata& meta);
// Median fit time per (curve, n, loss).
std::string barplot_csv(const std::vector<ResultRow>& rows, const RunMetadata& meta);
// K, c, R, Q, ARE and the weighted criterion over delta = k/200, k = 1..199.
std::string tradeoff_csv(const std::vector<int>& dims, double w_efficiency, double w_robustness,
                         const RunMetadata& meta);

}  // namespace sphindex

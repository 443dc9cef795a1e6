#pragma once

#include <string>
#include <vector>

#include "mathrel/explain.hpp"

namespace mathrel::render {

// One text-plot row: "base=0.0509 f_Addition=0.8222" followed by the tokens
// tinted red (positive) / blue (negative), intensity scaled by |value| /
// max|value|. `color` enables 24-bit terminal escapes; without it values are
// printed inline after each token.
std::string attribution_text(const explain::Attribution& a, bool color);

// Horizontal bar chart for a class summary; the final row is the
// "sum of other features" bar.
std::string bar_summary_text(const explain::ClassBarSummary& summary,
                             std::size_t width = 40);

// Self-contained HTML (inline styles, no external references) with one text
// plot per (sample text, class) and one bar section per class.
std::string explain_html(
    const std::vector<std::vector<explain::Attribution>>& per_text,
    const std::vector<explain::ClassBarSummary>& bars);

}  // namespace mathrel::render

#include "mathrel/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mathrel::render {

namespace {

std::string fmt(double v, const char* spec = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

double max_abs(const std::vector<double>& vs) {
    double m = 0.0;
    for (double v : vs) m = std::max(m, std::abs(v));
    return m;
}

std::string header_line(const explain::Attribution& a) {
    return "base=" + fmt(a.base_value) + " f_" +
           std::string(data::label_ident(a.target_class)) + "=" + fmt(a.f_full);
}

std::string html_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace

std::string attribution_text(const explain::Attribution& a, bool color) {
    std::ostringstream out;
    out << header_line(a) << " | ";
    const double scale = max_abs(a.values);
    for (std::size_t i = 0; i < a.tokens.size(); ++i) {
        if (i > 0) out << ' ';
        const double v = a.values[i];
        const double t = scale > 0.0 ? std::abs(v) / scale : 0.0;
        if (color && t > 0.0) {
            // fade from white toward pure red/blue
            const int other = static_cast<int>(std::lround(255.0 * (1.0 - t)));
            const int r = v > 0 ? 255 : other;
            const int g = other;
            const int b = v < 0 ? 255 : other;
            char esc[64];
            std::snprintf(esc, sizeof(esc), "\x1b[48;2;%d;%d;%dm\x1b[30m", r, g, b);
            out << esc << a.tokens[i] << "\x1b[0m";
        } else if (color) {
            out << a.tokens[i];
        } else {
            out << a.tokens[i] << '(' << fmt(v, "%+.4f") << ')';
        }
    }
    return out.str();
}

std::string bar_summary_text(const explain::ClassBarSummary& summary,
                             std::size_t width) {
    std::ostringstream out;
    out << "mean |SHAP| for " << data::label_name(summary.target_class) << " ("
        << summary.n_attributions << " attributions)\n";
    double scale = summary.residual;
    for (const auto& [token, v] : summary.top) scale = std::max(scale, v);
    const auto bar = [&](double v) {
        const std::size_t w =
            scale > 0.0 ? static_cast<std::size_t>(
                              std::lround(static_cast<double>(width) * v / scale))
                        : 0;
        return std::string(w, '#');
    };
    for (const auto& [token, v] : summary.top) {
        char line[160];
        std::snprintf(line, sizeof(line), "  %-22s %8s |%s\n", token.c_str(),
                      fmt(v).c_str(), bar(v).c_str());
        out << line;
    }
    char line[160];
    std::snprintf(line, sizeof(line), "  %-22s %8s |%s\n", "sum of other features",
                  fmt(summary.residual).c_str(), bar(summary.residual).c_str());
    out << line;
    return out.str();
}

namespace {

constexpr const char* kCss = R"(
body { font-family: sans-serif; margin: 2em; color: #222; }
h1 { font-size: 1.4em; }
h2 { font-size: 1.1em; margin-top: 1.6em; }
.src { color: #555; font-style: italic; }
.row { margin: 0.45em 0; line-height: 1.9; }
.hdr { font-family: monospace; background: #f2f2f2; padding: 2px 6px; margin-right: 0.6em; }
.tok { padding: 2px 3px; border-radius: 3px; margin: 0 1px; }
.bar-row { display: flex; align-items: center; margin: 2px 0; font-family: monospace; }
.bar-label { width: 14em; text-align: right; padding-right: 8px; }
.bar-fill { background: #d62728; height: 0.9em; }
.bar-fill.other { background: #888; }
.bar-num { padding-left: 6px; }
)";

}  // namespace

std::string explain_html(
    const std::vector<std::vector<explain::Attribution>>& per_text,
    const std::vector<explain::ClassBarSummary>& bars) {
    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
        << "<title>Shapley explanation report</title>\n<style>" << kCss
        << "</style>\n</head>\n<body>\n";
    out << "<h1>Shapley explanation report</h1>\n";

    for (std::size_t t = 0; t < per_text.size(); ++t) {
        const auto& attributions = per_text[t];
        if (attributions.empty()) continue;
        out << "<section>\n<h2>Text " << (t + 1) << "</h2>\n";
        out << "<p class=\"src\">" << html_escape(attributions[0].source_text)
            << "</p>\n";
        for (const auto& a : attributions) {
            out << "<div class=\"row\"><span class=\"hdr\">"
                << html_escape(header_line(a)) << "</span>";
            const double scale = max_abs(a.values);
            for (std::size_t i = 0; i < a.tokens.size(); ++i) {
                const double v = a.values[i];
                const double alpha = scale > 0.0 ? std::abs(v) / scale : 0.0;
                if (alpha == 0.0) {
                    out << "<span class=\"tok\">" << html_escape(a.tokens[i])
                        << "</span>";
                } else {
                    const char* rgb = v > 0 ? "214,39,40" : "31,119,220";
                    out << "<span class=\"tok\" style=\"background-color: rgba("
                        << rgb << ',' << fmt(alpha, "%.3f") << ")\" title=\""
                        << fmt(v, "%+.6f") << "\">" << html_escape(a.tokens[i])
                        << "</span>";
                }
            }
            out << "</div>\n";
        }
        out << "</section>\n";
    }

    for (const auto& summary : bars) {
        out << "<section>\n<h2>Mean |SHAP| per token &mdash; "
            << html_escape(std::string(data::label_name(summary.target_class)))
            << "</h2>\n";
        double scale = summary.residual;
        for (const auto& [token, v] : summary.top) scale = std::max(scale, v);
        const auto bar_row = [&](const std::string& label, double v, bool other) {
            const double pct = scale > 0.0 ? 100.0 * v / scale : 0.0;
            out << "<div class=\"bar-row\"><span class=\"bar-label\">"
                << html_escape(label) << "</span><div class=\"bar-fill"
                << (other ? " other" : "") << "\" style=\"width:"
                << fmt(pct * 4.0, "%.1f") << "px\"></div><span class=\"bar-num\">"
                << fmt(v) << "</span></div>\n";
        };
        for (const auto& [token, v] : summary.top) bar_row(token, v, false);
        bar_row("sum of other features", summary.residual, true);
        out << "</section>\n";
    }

    out << "</body>\n</html>\n";
    return out.str();
}

}  // namespace mathrel::render

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nhsim/cli.hpp"

namespace nhsim {

namespace {

constexpr double kW = 720, kH = 440;
constexpr double kL = 70, kR = 170, kT = 40, kB = 55;  // margins; legend on the right

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

std::string num(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return b;
}

std::string tick_label(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

struct Axes {
    double x0, x1, y0, y1;
    double px(double x) const { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); }
    double py(double y) const { return kH - kB - (y - y0) / (y1 - y0) * (kH - kT - kB); }
};

void widen(double& lo, double& hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
}

std::ostringstream header(const std::string& title) {
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title) << "</text>\n";
    return s;
}

void frame(std::ostringstream& s, const Axes& a, const std::string& xlabel, const std::string& ylabel,
           bool x_ticks = true) {
    s << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR << "\" height=\"" << kH - kT - kB
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = a.y0 + (a.y1 - a.y0) * i / 4;
        s << "<line x1=\"" << kL - 4 << "\" x2=\"" << kL << "\" y1=\"" << num(a.py(y)) << "\" y2=\"" << num(a.py(y))
          << "\" stroke=\"black\"/><text x=\"" << kL - 6 << "\" y=\"" << num(a.py(y) + 4)
          << "\" text-anchor=\"end\">" << tick_label(y) << "</text>\n";
        if (!x_ticks) continue;
        const double x = a.x0 + (a.x1 - a.x0) * i / 4;
        s << "<line x1=\"" << num(a.px(x)) << "\" x2=\"" << num(a.px(x)) << "\" y1=\"" << kH - kB << "\" y2=\""
          << kH - kB + 4 << "\" stroke=\"black\"/><text x=\"" << num(a.px(x)) << "\" y=\"" << kH - kB + 17
          << "\" text-anchor=\"middle\">" << tick_label(x) << "</text>\n";
    }
    s << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">" << esc(xlabel)
      << "</text>\n";
    s << "<text transform=\"translate(16," << (kT + kH - kB) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << esc(ylabel) << "</text>\n";
}

void legend(std::ostringstream& s, const std::vector<Series>& series) {
    const std::size_t shown = std::min<std::size_t>(series.size(), 24);
    for (std::size_t i = 0; i < shown; ++i) {
        const double y = kT + 10 + 16.0 * static_cast<double>(i);
        s << "<line x1=\"" << kW - kR + 12 << "\" x2=\"" << kW - kR + 32 << "\" y1=\"" << y << "\" y2=\"" << y
          << "\" stroke=\"" << kPalette[i % 10] << "\" stroke-width=\"2\""
          << (series[i].dashed ? " stroke-dasharray=\"5,3\"" : "") << "/><text x=\"" << kW - kR + 37 << "\" y=\""
          << y + 4 << "\">" << esc(series[i].label) << "</text>\n";
    }
}

void save(const std::filesystem::path& path, std::ostringstream& s) {
    s << "</svg>\n";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << s.str();
}

Axes bounds(const std::vector<Series>& series) {
    Axes a{1e300, -1e300, 1e300, -1e300};
    for (const auto& sr : series)
        for (std::size_t i = 0; i < sr.x.size(); ++i) {
            if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) continue;
            a.x0 = std::min(a.x0, sr.x[i]);
            a.x1 = std::max(a.x1, sr.x[i]);
            a.y0 = std::min(a.y0, sr.y[i]);
            a.y1 = std::max(a.y1, sr.y[i]);
        }
    widen(a.x0, a.x1);
    widen(a.y0, a.y1);
    const double pad = 0.05 * (a.y1 - a.y0);
    a.y0 -= pad;
    a.y1 += pad;
    return a;
}

}  // namespace

void plot_lines(const std::filesystem::path& path, const std::string& title, const std::string& xlabel,
                const std::string& ylabel, const std::vector<Series>& series) {
    auto s = header(title);
    const Axes a = bounds(series);
    frame(s, a, xlabel, ylabel);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& sr = series[k];
        s << "<polyline fill=\"none\" stroke=\"" << kPalette[k % 10] << "\" stroke-width=\"1.6\""
          << (sr.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
        // thin long series to a few thousand vertices
        const std::size_t stride = std::max<std::size_t>(1, sr.x.size() / 2000);
        for (std::size_t i = 0; i < sr.x.size(); i += stride)
            s << num(a.px(sr.x[i])) << "," << num(a.py(sr.y[i])) << " ";
        if (!sr.x.empty()) s << num(a.px(sr.x.back())) << "," << num(a.py(sr.y.back()));
        s << "\"/>\n";
    }
    legend(s, series);
    save(path, s);
}

void plot_scatter(const std::filesystem::path& path, const std::string& title, const std::vector<Series>& series,
                  const std::string& xlabel, const std::string& ylabel) {
    auto s = header(title);
    const Axes a = bounds(series);
    frame(s, a, xlabel, ylabel);
    for (std::size_t k = 0; k < series.size(); ++k)
        for (std::size_t i = 0; i < series[k].x.size(); ++i)
            s << "<circle cx=\"" << num(a.px(series[k].x[i])) << "\" cy=\"" << num(a.py(series[k].y[i]))
              << "\" r=\"2.5\" fill=\"" << kPalette[k % 10] << "\"/>\n";
    legend(s, series);
    save(path, s);
}

void plot_bars(const std::filesystem::path& path, const std::string& title, const std::string& xlabel,
               const std::vector<std::string>& categories, const std::vector<Series>& groups) {
    auto s = header(title);
    double top = 0;
    for (const auto& g : groups)
        for (double v : g.y) top = std::max(top, v);
    Axes a{0, static_cast<double>(std::max<std::size_t>(1, categories.size())), 0, top > 0 ? top * 1.08 : 1};
    frame(s, a, xlabel, "escape probability", false);
    const double slot = (kW - kL - kR) / a.x1;
    const double bw = 0.8 * slot / static_cast<double>(std::max<std::size_t>(1, groups.size()));
    for (std::size_t c = 0; c < categories.size(); ++c) {
        const double x = a.px(static_cast<double>(c));
        s << "<text x=\"" << num(x + slot / 2) << "\" y=\"" << kH - kB + 17 << "\" text-anchor=\"middle\">"
          << esc(categories[c]) << "</text>\n";
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (c >= groups[g].y.size()) continue;
            const double v = std::max(0.0, groups[g].y[c]);
            s << "<rect x=\"" << num(x + 0.1 * slot + bw * static_cast<double>(g)) << "\" y=\"" << num(a.py(v))
              << "\" width=\"" << num(bw) << "\" height=\"" << num(a.py(0) - a.py(v)) << "\" fill=\""
              << kPalette[g % 10] << "\"/>\n";
        }
    }
    legend(s, groups);
    save(path, s);
}

void plot_heatmap(const std::filesystem::path& path, const std::string& title, const Eigen::VectorXd& x,
                  const Eigen::MatrixXd& values, const std::string& xlabel, const std::string& ylabel) {
    auto s = header(title);
    Axes a{x.size() ? x(0) : 0.0, x.size() ? x(x.size() - 1) : 1.0, 0, static_cast<double>(values.cols())};
    widen(a.x0, a.x1);
    const double vmax = values.size() ? std::max(values.maxCoeff(), 1e-300) : 1.0;
    // bin time so the file stays small
    const Eigen::Index cols = values.cols(), rows = values.rows();
    const Eigen::Index bins = std::min<Eigen::Index>(rows, 400);
    const double cw = (kW - kL - kR) / static_cast<double>(std::max<Eigen::Index>(1, bins));
    const double ch = (kH - kT - kB) / static_cast<double>(std::max<Eigen::Index>(1, cols));
    for (Eigen::Index b = 0; b < bins; ++b) {
        const Eigen::Index r0 = b * rows / bins, r1 = std::max(r0 + 1, (b + 1) * rows / bins);
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double v = values.block(r0, c, r1 - r0, 1).mean() / vmax;
            const int shade = static_cast<int>(std::lround(255 * (1 - std::clamp(v, 0.0, 1.0))));
            char color[16];
            std::snprintf(color, sizeof color, "#%02x%02x%02x", shade, shade, 255);
            s << "<rect x=\"" << num(kL + cw * static_cast<double>(b)) << "\" y=\""
              << num(kH - kB - ch * static_cast<double>(c + 1)) << "\" width=\"" << num(cw + 0.3) << "\" height=\""
              << num(ch + 0.3) << "\" fill=\"" << color << "\"/>\n";
        }
    }
    frame(s, a, xlabel, ylabel);
    s << "<text x=\"" << kW - kR + 12 << "\" y=\"" << kT + 10 << "\">max " << tick_label(vmax) << "</text>\n";
    save(path, s);
}

}  // namespace nhsim

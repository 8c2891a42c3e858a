#include "hiclr/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hiclr {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Frame {
    double lo, hi;
    double plot_w() const { return kWidth - kLeft - kRight; }
    double plot_h() const { return kHeight - kTop - kBottom; }
    double y(double v) const { return kTop + plot_h() * (1.0 - (v - lo) / (hi - lo)); }
};

Frame value_range(double lo, double hi) {
    if (!(lo < hi)) {
        lo = std::isfinite(lo) ? lo - 0.5 : 0.0;
        hi = std::isfinite(hi) ? hi + 0.5 : 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

void header(std::ostringstream& o, const std::string& title, const std::string& y_label, const Frame& f) {
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n"
      << "<text transform=\"translate(16," << kTop + f.plot_h() / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(y_label) << "</text>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << f.plot_w() << "\" height=\"" << f.plot_h()
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = f.lo + (f.hi - f.lo) * i / 4.0;
        o << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.y(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n"
          << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + f.plot_w() << "\" y1=\"" << f.y(v) << "\" y2=\""
          << f.y(v) << "\" stroke=\"#ddd\"/>\n";
    }
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<PlotSeries>& series) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t n = 1;
    for (const auto& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values)
            if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    }
    const Frame f = value_range(lo, hi);
    auto x = [&](std::size_t i) {
        return kLeft + (n > 1 ? f.plot_w() * static_cast<double>(i) / static_cast<double>(n - 1) : f.plot_w() / 2);
    };

    std::ostringstream o;
    o.precision(4);
    header(o, title, y_label, f);
    o << "<text x=\"" << kLeft + f.plot_w() / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n"
      << "<text x=\"" << kLeft << "\" y=\"" << kTop + f.plot_h() + 16 << "\" text-anchor=\"middle\">1</text>\n"
      << "<text x=\"" << kLeft + f.plot_w() << "\" y=\"" << kTop + f.plot_h() + 16 << "\" text-anchor=\"middle\">"
      << n << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = kPalette[k % std::size(kPalette)];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
        for (std::size_t i = 0; i < series[k].values.size(); ++i)
            if (std::isfinite(series[k].values[i])) o << x(i) << ',' << f.y(series[k].values[i]) << ' ';
        o << "\"/>\n";
        const double ly = kTop + 14 + 18.0 * static_cast<double>(k);
        o << "<line x1=\"" << kWidth - kRight + 12 << "\" x2=\"" << kWidth - kRight + 32 << "\" y1=\"" << ly - 4
          << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n"
          << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly << "\">" << escape(series[k].name)
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string bar_chart_svg(const std::string& title, const std::string& y_label,
                          const std::vector<std::string>& labels, const std::vector<double>& values) {
    double hi = 0.0;
    for (double v : values)
        if (std::isfinite(v)) hi = std::max(hi, v);
    const Frame f = value_range(0.0, hi > 0.0 ? hi : 1.0);

    std::ostringstream o;
    o.precision(4);
    header(o, title, y_label, f);
    const double slot = f.plot_w() / static_cast<double>(std::max<std::size_t>(values.size(), 1));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) continue;
        const double x0 = kLeft + slot * (static_cast<double>(i) + 0.15);
        const double top = f.y(values[i]);
        o << "<rect x=\"" << x0 << "\" y=\"" << top << "\" width=\"" << slot * 0.7 << "\" height=\""
          << f.y(0.0) - top << "\" fill=\"" << kPalette[i % std::size(kPalette)] << "\"/>\n"
          << "<text x=\"" << x0 + slot * 0.35 << "\" y=\"" << top - 4 << "\" text-anchor=\"middle\">" << values[i]
          << "</text>\n"
          << "<text x=\"" << x0 + slot * 0.35 << "\" y=\"" << kTop + f.plot_h() + 16
          << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(i < labels.size() ? labels[i] : "")
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace hiclr

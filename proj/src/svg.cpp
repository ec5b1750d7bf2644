#include "spillover/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spillover/common.hpp"
#include "spillover/csv.hpp"

namespace spillover::svg {

namespace {

constexpr double W = 720, H = 480;
constexpr double ML = 70, MR = 25, MT = 45, MB = 55;  // margins

std::string num(double v) { return csv::format_double(std::round(v * 100) / 100); }

struct Scale {
    double lo, hi, px0, px1;
    double operator()(double v) const {
        if (hi == lo) return (px0 + px1) / 2;
        return px0 + (v - lo) / (hi - lo) * (px1 - px0);
    }
};

void axes(std::ostringstream& out, const Scale& sx, const Scale& sy, const std::string& x_label,
          const std::string& y_label, const std::string& title) {
    out << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
    out << "<text x='" << W / 2 << "' y='25' text-anchor='middle' font-size='16'>" << title
        << "</text>\n";
    out << "<line x1='" << ML << "' y1='" << H - MB << "' x2='" << W - MR << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    out << "<line x1='" << ML << "' y1='" << MT << "' x2='" << ML << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    for (int k = 0; k <= 5; ++k) {
        double fx = sx.lo + k * (sx.hi - sx.lo) / 5;
        double px = sx(fx);
        out << "<line x1='" << px << "' y1='" << H - MB << "' x2='" << px << "' y2='"
            << H - MB + 5 << "' stroke='black'/>\n";
        out << "<text x='" << px << "' y='" << H - MB + 20 << "' text-anchor='middle' "
            << "font-size='11'>" << num(fx) << "</text>\n";
        double fy = sy.lo + k * (sy.hi - sy.lo) / 5;
        double py = sy(fy);
        out << "<line x1='" << ML - 5 << "' y1='" << py << "' x2='" << ML << "' y2='" << py
            << "' stroke='black'/>\n";
        out << "<text x='" << ML - 8 << "' y='" << py + 4 << "' text-anchor='end' "
            << "font-size='11'>" << num(fy) << "</text>\n";
    }
    out << "<text x='" << (ML + W - MR) / 2 << "' y='" << H - 12
        << "' text-anchor='middle' font-size='13'>" << x_label << "</text>\n";
    out << "<text x='18' y='" << (MT + H - MB) / 2
        << "' text-anchor='middle' font-size='13' transform='rotate(-90 18 "
        << (MT + H - MB) / 2 << ")'>" << y_label << "</text>\n";
}

void write(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open SVG output: " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n"
        << body << "</svg>\n";
}

}  // namespace

void line_chart(const std::string& path, const std::string& title,
                const std::vector<double>& x, const std::vector<Series>& series,
                const std::string& x_label, const std::string& y_label) {
    if (x.empty() || series.empty()) throw Error("line chart needs data");
    double ylo = HUGE_VAL, yhi = -HUGE_VAL;
    for (const auto& s : series) {
        for (double v : s.y) {
            if (std::isnan(v)) continue;
            ylo = std::min(ylo, v);
            yhi = std::max(yhi, v);
        }
        for (double v : s.band_lo)
            if (!std::isnan(v)) ylo = std::min(ylo, v);
        for (double v : s.band_hi)
            if (!std::isnan(v)) yhi = std::max(yhi, v);
    }
    if (!(ylo <= yhi)) { ylo = 0; yhi = 1; }
    double pad = (yhi - ylo) * 0.08 + 1e-12;
    Scale sx{*std::min_element(x.begin(), x.end()), *std::max_element(x.begin(), x.end()), ML,
             W - MR};
    Scale sy{ylo - pad, yhi + pad, H - MB, MT};

    std::ostringstream out;
    axes(out, sx, sy, x_label, y_label, title);
    if (sy.lo < 0 && sy.hi > 0)
        out << "<line x1='" << ML << "' y1='" << sy(0.0) << "' x2='" << W - MR << "' y2='"
            << sy(0.0) << "' stroke='#bbbbbb' stroke-dasharray='4 3'/>\n";
    int legend_row = 0;
    for (const auto& s : series) {
        if (!s.band_lo.empty() && s.band_lo.size() == x.size() && s.band_hi.size() == x.size()) {
            out << "<polygon fill='" << s.color << "' fill-opacity='0.15' stroke='none' points='";
            for (size_t k = 0; k < x.size(); ++k)
                out << sx(x[k]) << "," << sy(s.band_lo[k]) << " ";
            for (size_t k = x.size(); k-- > 0;)
                out << sx(x[k]) << "," << sy(s.band_hi[k]) << " ";
            out << "'/>\n";
        }
        out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='2' points='";
        for (size_t k = 0; k < x.size(); ++k)
            if (!std::isnan(s.y[k])) out << sx(x[k]) << "," << sy(s.y[k]) << " ";
        out << "'/>\n";
        out << "<text x='" << W - MR - 10 << "' y='" << MT + 15 + 16 * legend_row
            << "' text-anchor='end' font-size='12' fill='" << s.color << "'>" << s.name
            << "</text>\n";
        ++legend_row;
    }
    write(path, out.str());
}

void heatmap(const std::string& path, const std::string& title,
             const std::vector<double>& x_values, const std::vector<int>& y_values,
             const Eigen::MatrixXd& values, const std::string& x_label,
             const std::string& y_label) {
    if (values.rows() != static_cast<long>(y_values.size()) ||
        values.cols() != static_cast<long>(x_values.size()))
        throw Error("heatmap dimensions do not match labels");
    double vmax = 1e-12;
    for (long r = 0; r < values.rows(); ++r)
        for (long c = 0; c < values.cols(); ++c)
            if (!std::isnan(values(r, c))) vmax = std::max(vmax, std::abs(values(r, c)));

    std::ostringstream out;
    out << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
    out << "<text x='" << W / 2 << "' y='25' text-anchor='middle' font-size='16'>" << title
        << "</text>\n";
    double cw = (W - ML - MR) / values.cols();
    double ch = (H - MT - MB) / values.rows();
    for (long r = 0; r < values.rows(); ++r)
        for (long c = 0; c < values.cols(); ++c) {
            double v = values(r, c);
            std::string fill = "#eeeeee";
            if (!std::isnan(v)) {
                // blue (negative) .. white .. red (positive)
                double s = std::clamp(v / vmax, -1.0, 1.0);
                int rr = s >= 0 ? 255 : static_cast<int>(255 * (1 + s));
                int gg = static_cast<int>(255 * (1 - std::abs(s)));
                int bb = s <= 0 ? 255 : static_cast<int>(255 * (1 - s));
                char buf[8];
                snprintf(buf, sizeof(buf), "#%02x%02x%02x", rr, gg, bb);
                fill = buf;
            }
            double px = ML + c * cw;
            double py = H - MB - (r + 1) * ch;  // periods increase upwards
            out << "<rect x='" << px << "' y='" << py << "' width='" << cw << "' height='" << ch
                << "' fill='" << fill << "' stroke='#dddddd'/>\n";
        }
    for (size_t c = 0; c < x_values.size(); ++c)
        out << "<text x='" << ML + (c + 0.5) * cw << "' y='" << H - MB + 18
            << "' text-anchor='middle' font-size='11'>" << num(x_values[c]) << "</text>\n";
    for (size_t r = 0; r < y_values.size(); ++r)
        out << "<text x='" << ML - 8 << "' y='" << H - MB - (r + 0.5) * ch + 4
            << "' text-anchor='end' font-size='11'>" << y_values[r] << "</text>\n";
    out << "<text x='" << (ML + W - MR) / 2 << "' y='" << H - 12
        << "' text-anchor='middle' font-size='13'>" << x_label << "</text>\n";
    out << "<text x='18' y='" << (MT + H - MB) / 2
        << "' text-anchor='middle' font-size='13' transform='rotate(-90 18 "
        << (MT + H - MB) / 2 << ")'>" << y_label << "</text>\n";
    write(path, out.str());
}

}  // namespace spillover::svg

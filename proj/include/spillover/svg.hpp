#pragma once

// Dependency-light static SVG output: effect curves with CI bands and a
// distance x period heatmap.

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace spillover::svg {

struct Series {
    std::string name;
    std::vector<double> y;
    std::vector<double> band_lo;  // optional, same length as y
    std::vector<double> band_hi;
    std::string color = "#222222";
};

void line_chart(const std::string& path, const std::string& title,
                const std::vector<double>& x, const std::vector<Series>& series,
                const std::string& x_label, const std::string& y_label);

void heatmap(const std::string& path, const std::string& title,
             const std::vector<double>& x_values, const std::vector<int>& y_values,
             const Eigen::MatrixXd& values,  // rows = y, cols = x
             const std::string& x_label, const std::string& y_label);

}  // namespace spillover::svg

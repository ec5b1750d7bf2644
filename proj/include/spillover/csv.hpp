#pragma once

// Minimal CSV support: header + unquoted fields, deterministic float
// formatting (shortest round-trip via std::to_chars).

#include <string>
#include <vector>

namespace spillover::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const;       // -1 if absent
    int require(const std::string& name) const;   // throws InvalidPanel
};

Table read_file(const std::string& path);
Table parse(const std::string& text);

std::string format_double(double v);
double parse_double(const std::string& s, const std::string& context);

class Writer {
public:
    explicit Writer(const std::string& path);
    ~Writer();
    void field(const std::string& s);
    void field(double v);
    void field(long long v);
    void end_row();

private:
    struct Impl;
    Impl* impl_;
};

}  // namespace spillover::csv

#include "spillover/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spillover/common.hpp"

namespace spillover::csv {

int Table::col(const std::string& name) const {
    for (size_t j = 0; j < header.size(); ++j)
        if (header[j] == name) return static_cast<int>(j);
    return -1;
}

int Table::require(const std::string& name) const {
    int j = col(name);
    if (j < 0) throw InvalidPanel("missing required CSV column '" + name + "'");
    return j;
}

static std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

Table parse(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto fields = split_line(line);
        if (first) {
            t.header = fields;
            first = false;
        } else {
            if (fields.size() != t.header.size())
                throw InvalidPanel("CSV row has " + std::to_string(fields.size()) +
                                   " fields, header has " + std::to_string(t.header.size()));
            t.rows.push_back(std::move(fields));
        }
    }
    if (first) throw InvalidPanel("CSV file is empty (no header)");
    return t;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidPanel("cannot open CSV file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& context) {
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw InvalidPanel("cannot parse number '" + s + "' in " + context);
    return v;
}

struct Writer::Impl {
    std::ofstream out;
    bool row_started = false;
};

Writer::Writer(const std::string& path) : impl_(new Impl) {
    impl_->out.open(path, std::ios::binary);
    if (!impl_->out) throw Error("cannot open output file: " + path);
}

Writer::~Writer() {
    impl_->out.flush();
    delete impl_;
}

void Writer::field(const std::string& s) {
    if (impl_->row_started) impl_->out << ',';
    impl_->out << s;
    impl_->row_started = true;
}

void Writer::field(double v) { field(format_double(v)); }
void Writer::field(long long v) { field(std::to_string(v)); }

void Writer::end_row() {
    impl_->out << '\n';
    impl_->row_started = false;
}

}  // namespace spillover::csv

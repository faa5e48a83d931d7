#include "rmtd/samples_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmtd {

namespace {

bool parse_double(const std::string& token, double& out) {
    const char* first = token.data();
    const char* last = token.data() + token.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
    if (first == last) return false;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> tokens;
    std::string token;
    std::stringstream ss(line);
    while (std::getline(ss, token, ',')) tokens.push_back(token);
    if (!line.empty() && line.back() == ',') tokens.emplace_back();
    return tokens;
}

}  // namespace

ComplexMatrix read_samples_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_samples_csv: cannot open '" + path + "'");

    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tokens = split_csv_line(line);
        double probe = 0.0;
        if (first_content_line && !parse_double(tokens[0], probe)) {
            first_content_line = false;
            continue;  // header row
        }
        first_content_line = false;
        std::vector<double> values(tokens.size());
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (!parse_double(tokens[i], values[i]))
                throw std::runtime_error("read_samples_csv: '" + path + "' line " +
                                         std::to_string(line_no) + ", field " +
                                         std::to_string(i + 1) + ": not a number: '" +
                                         tokens[i] + "'");
        }
        if (values.size() % 2 != 0)
            throw std::runtime_error("read_samples_csv: '" + path + "' line " +
                                     std::to_string(line_no) + ": odd field count " +
                                     std::to_string(values.size()) +
                                     " (expected interleaved re,im pairs)");
        if (!rows.empty() && values.size() != rows.front().size())
            throw std::runtime_error("read_samples_csv: '" + path + "' line " +
                                     std::to_string(line_no) + ": " +
                                     std::to_string(values.size()) + " fields but line with " +
                                     std::to_string(rows.front().size()) + " fields seen earlier");
        rows.push_back(std::move(values));
    }
    if (rows.empty())
        throw std::runtime_error("read_samples_csv: '" + path + "' contains no sample rows");

    const Eigen::Index P = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index N = static_cast<Eigen::Index>(rows.front().size() / 2);
    ComplexMatrix X(P, N);
    for (Eigen::Index p = 0; p < P; ++p)
        for (Eigen::Index n = 0; n < N; ++n)
            X(p, n) = Complex(rows[static_cast<std::size_t>(p)][static_cast<std::size_t>(2 * n)],
                              rows[static_cast<std::size_t>(p)][static_cast<std::size_t>(2 * n + 1)]);
    return X;
}

void write_samples_csv(const ComplexMatrix& samples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_samples_csv: cannot open '" + path + "'");
    char buf[64];
    for (Eigen::Index p = 0; p < samples.rows(); ++p) {
        for (Eigen::Index n = 0; n < samples.cols(); ++n) {
            if (n) out << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", samples(p, n).real());
            out << buf << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", samples(p, n).imag());
            out << buf;
        }
        out << '\n';
    }
    if (!out.good())
        throw std::runtime_error("write_samples_csv: I/O failure while writing '" + path + "'");
}

}  // namespace rmtd

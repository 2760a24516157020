#include "io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace seqcpd::io {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    out = std::strtod(s.c_str(), &end);
    return errno == 0 && end == s.c_str() + s.size() && std::isfinite(out);
}

}  // namespace

Series ingest(const std::string& path, InputFormat format, IngestReport* report) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file '" + path + "'");
    std::vector<double> column;
    std::string line;
    long lineno = 0;
    long dropped = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string tok = trim(line);
        if (tok.empty() || tok[0] == '#') continue;
        double v = 0.0;
        if (!parse_double(tok, v)) {
            if (lineno == 1) continue;  // header line
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unparseable value '" +
                                     tok + "'");
        }
        if (format == InputFormat::Prices && !(v > 0.0)) {
            ++dropped;
            continue;
        }
        column.push_back(v);
    }
    if (report) report->dropped_rows = dropped;
    if (format == InputFormat::Values) {
        if (column.empty()) throw std::runtime_error(path + ": no observations");
        return Series(std::move(column));
    }
    if (column.size() < 2) throw std::runtime_error(path + ": need at least 2 prices");
    std::vector<double> returns(column.size() - 1);
    for (std::size_t i = 1; i < column.size(); ++i)
        returns[i - 1] = 100.0 * (std::log(column[i]) - std::log(column[i - 1]));
    return Series(std::move(returns));
}

void atomic_write(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
        out << contents;
        if (!out) throw std::runtime_error("write failed on '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("cannot rename '" + tmp + "' to '" + path + "'");
    }
}

namespace {

void write_echo(std::ostringstream& out, const ConfigEcho& echo) {
    for (const auto& [k, v] : echo) out << "# " << k << "=" << v << "\n";
}

}  // namespace

std::string format_trajectory(const MonitorOutcome& outcome, const ConfigEcho& echo) {
    std::ostringstream out;
    write_echo(out, echo);
    out << "k\tC_k\tthreshold\tcrossed\tskipped_points\n";
    char buf[128];
    for (const StepRecord& r : outcome.trajectory) {
        std::snprintf(buf, sizeof(buf), "%ld\t%.8g\t%.8g\t%d\t%d\n", r.k, r.stat, r.threshold,
                      r.crossed ? 1 : 0, r.skipped_points);
        out << buf;
    }
    return out.str();
}

std::string format_segmentation(const Segmentation& seg, const ConfigEcho& echo) {
    std::ostringstream out;
    write_echo(out, echo);
    for (const std::string& note : seg.notes) out << "# note: " << note << "\n";
    out << "break_index\talarm_index\tmonitor_resume\ttest_used\tstatistic\tcritical_value\tsegment_theta\n";
    for (std::size_t i = 0; i < seg.audit.size(); ++i) {
        const SegmentBreak& b = seg.audit[i];
        out << b.break_index << "\t" << b.alarm_index << "\t" << b.monitor_resume << "\t"
            << b.test_used << "\t" << b.statistic << "\t" << b.critical_value << "\t";
        const Eigen::VectorXd& th = seg.segments[i].fitted.theta_hat;
        for (int j = 0; j < th.size(); ++j) out << (j ? "," : "") << th(j);
        out << "\n";
    }
    // Trailing segment (no break) carries only its fitted parameters.
    if (!seg.segments.empty()) {
        const SegmentPiece& last = seg.segments.back();
        out << "-\t-\t-\tfinal\t-\t-\t";
        for (int j = 0; j < last.fitted.theta_hat.size(); ++j)
            out << (j ? "," : "") << last.fitted.theta_hat(j);
        out << "\n";
    }
    return out.str();
}

std::string format_series(const Series& s, const ConfigEcho& echo) {
    std::ostringstream out;
    write_echo(out, echo);
    out << "x\n";
    char buf[64];
    for (double v : s.values()) {
        std::snprintf(buf, sizeof(buf), "%.12g\n", v);
        out << buf;
    }
    return out.str();
}

ConfigEcho read_config_echo(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    ConfigEcho echo;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) != 0) break;
        const std::string body = line.substr(2);
        const auto eq = body.find('=');
        if (eq == std::string::npos) continue;
        echo.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    }
    return echo;
}

}  // namespace seqcpd::io

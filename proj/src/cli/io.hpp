#pragma once

#include <string>
#include <utility>
#include <vector>

#include "seqcpd/detector.hpp"
#include "seqcpd/retro.hpp"
#include "seqcpd/series.hpp"

namespace seqcpd::io {

enum class InputFormat { Values, Prices };

struct IngestReport {
    long dropped_rows = 0;  // Prices: missing/nonpositive rows skipped
};

/// Read a one-record-per-line file. Values: the column is the series.
/// Prices: transformed to 100 * (log P_t - log P_{t-1}); nonpositive prices
/// are dropped and counted. A non-numeric first line is treated as a header.
Series ingest(const std::string& path, InputFormat format, IngestReport* report = nullptr);

/// Key=value pairs echoed at the top of every output file (and to stdout) so
/// a run can be reproduced from its artifacts alone.
using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

/// Write via a temporary file in the same directory, then rename.
void atomic_write(const std::string& path, const std::string& contents);

std::string format_trajectory(const MonitorOutcome& outcome, const ConfigEcho& echo);
std::string format_segmentation(const Segmentation& seg, const ConfigEcho& echo);
std::string format_series(const Series& s, const ConfigEcho& echo);

/// Parse the "# key=value" comment lines back out of an output file.
ConfigEcho read_config_echo(const std::string& path);

}  // namespace seqcpd::io

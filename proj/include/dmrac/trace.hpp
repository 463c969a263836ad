#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dmrac/numerics.hpp"

namespace dmrac {

/// Everything observed at one control instant t_i. Weights-related fields
/// refer to the values in effect when the control was computed.
struct TraceRow {
  double t = 0.0;
  Vec x;
  Vec x_rm;
  Vec e;
  Vec u;
  Vec nu_ad;
  Vec delta_true;
  Vec delta_gen;
  double w_fro = 0.0;
  std::size_t buf_size = 0;
  double train_loss = 0.0;  // NaN until the first training round
  std::size_t train_rounds = 0;
  std::uint64_t feature_version = 0;
};

struct SimTrace {
  double dt = 0.0;
  std::vector<TraceRow> rows;
  // Outer weights per row, only filled when requested by the config.
  std::vector<Mat> weights;
  std::size_t admitted = 0;
  std::size_t rejected = 0;
  // Steps whose feature snapshot failed its publication checksum.
  std::size_t snapshot_violations = 0;
  bool snapshots_checked = false;

  bool empty() const { return rows.empty(); }
};

std::string trace_csv_header(Eigen::Index n, Eigen::Index m);

/// One header row and one row per step; floats with 17 significant digits.
void write_trace_csv(const SimTrace& trace, std::ostream& os);

/// Reads the named numeric columns back from a trace CSV; each returned
/// vector holds one column. Throws ParseError on malformed input.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::ptrdiff_t column(const std::string& name) const;
};
CsvTable read_csv(std::istream& is);

}  // namespace dmrac

#include "dmrac/trace.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace dmrac {

std::string trace_csv_header(Eigen::Index n, Eigen::Index m) {
  std::string h = "t";
  for (Eigen::Index i = 0; i < n; ++i) h += ",x" + std::to_string(i);
  for (Eigen::Index i = 0; i < n; ++i) h += ",xrm" + std::to_string(i);
  h += ",e_norm";
  for (Eigen::Index i = 0; i < m; ++i) h += ",u" + std::to_string(i);
  for (Eigen::Index i = 0; i < m; ++i) h += ",nu_ad" + std::to_string(i);
  for (Eigen::Index i = 0; i < m; ++i) h += ",delta_true" + std::to_string(i);
  for (Eigen::Index i = 0; i < m; ++i) h += ",delta_gen" + std::to_string(i);
  h += ",W_fro,buf_size,train_loss,train_rounds";
  return h;
}

void write_trace_csv(const SimTrace& trace, std::ostream& os) {
  if (trace.rows.empty()) throw Error(ErrorCode::EmptyTrace, "nothing to write");
  const Eigen::Index n = trace.rows.front().x.size();
  const Eigen::Index m = trace.rows.front().u.size();
  os << trace_csv_header(n, m) << '\n';
  const auto old_precision = os.precision(17);
  auto put = [&os](const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << v(i);
  };
  for (const TraceRow& r : trace.rows) {
    os << r.t;
    put(r.x);
    put(r.x_rm);
    os << ',' << r.e.norm();
    put(r.u);
    put(r.nu_ad);
    put(r.delta_true);
    put(r.delta_gen);
    os << ',' << r.w_fro << ',' << r.buf_size << ',' << r.train_loss << ',' << r.train_rounds
       << '\n';
  }
  os.precision(old_precision);
}

std::ptrdiff_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : it - header.begin();
}

CsvTable read_csv(std::istream& is) {
  CsvTable table;
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "csv: missing header");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError,
                    "csv line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != table.header.size()) {
      throw Error(ErrorCode::ParseError, "csv line " + std::to_string(lineno) + ": wrong arity");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace dmrac

#pragma once

// Repayment panel representation, state labelling from repayment ratios,
// and extraction of per-transition binary panels with risk sets.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "msfrail/errors.hpp"

namespace msfrail {

using AccountId = std::string;

struct StatePair {
  int from = 0;
  int to = 0;
  friend auto operator<=>(const StatePair&, const StatePair&) = default;
};

inline std::string to_string(const StatePair& p) {
  return "(" + std::to_string(p.from) + "," + std::to_string(p.to) + ")";
}

struct StateThresholds {
  double c1 = 0.60;
  double c2 = 0.82;
};

inline void validate(const StateThresholds& t) {
  if (!(0.0 < t.c1 && t.c1 < t.c2 && t.c2 < 1.0)) {
    throw std::invalid_argument("StateThresholds: need 0 < c1 < c2 < 1");
  }
}

struct TransitionSpec {
  std::vector<StatePair> pairs;  // kept sorted and unique

  static TransitionSpec standard() {
    return TransitionSpec{{{1, 1}, {1, 3}, {2, 1}, {2, 3}, {3, 1}, {3, 3}}};
  }

  bool contains(const StatePair& p) const {
    return std::binary_search(pairs.begin(), pairs.end(), p);
  }
  std::vector<int> destinations_from(int h) const {
    std::vector<int> out;
    for (const auto& p : pairs)
      if (p.from == h) out.push_back(p.to);
    return out;
  }
};

inline void validate(const TransitionSpec& spec) {
  if (spec.pairs.empty()) throw std::invalid_argument("TransitionSpec: empty");
  for (const auto& p : spec.pairs) {
    if (p.from < 1 || p.from > 3 || p.to < 1 || p.to > 3) {
      throw std::invalid_argument("TransitionSpec: states must be in {1,2,3}");
    }
  }
}

struct PanelRecord {
  AccountId account_id;
  int time = 0;  // month index, >= 1
  double paid = 0.0;
  double scheduled = 0.0;
  std::vector<double> covariates;
};

struct RepaymentPanel {
  std::vector<std::string> covariate_names;
  std::vector<PanelRecord> records;
};

struct StateRecord {
  AccountId account_id;
  int time = 0;
  int state = 0;  // 1, 2, 3
  std::vector<double> covariates;
};

struct StatePanel {
  std::vector<std::string> covariate_names;
  std::vector<StateRecord> records;
};

// ratio = paid/scheduled; 3 below c1, 2 in [c1, c2), 1 at or above c2.
inline int assign_state(double paid, double scheduled, const StateThresholds& thr) {
  if (!(scheduled > 0.0)) {
    throw std::invalid_argument("assign_state: scheduled must be > 0");
  }
  if (paid < 0.0) {
    throw std::invalid_argument("assign_state: paid must be >= 0");
  }
  const double r = paid / scheduled;
  if (r < thr.c1) return 3;
  if (r < thr.c2) return 2;
  return 1;
}

inline StatePanel to_state_panel(const RepaymentPanel& panel,
                                 const StateThresholds& thr) {
  validate(thr);
  StatePanel out;
  out.covariate_names = panel.covariate_names;
  out.records.reserve(panel.records.size());
  for (const auto& r : panel.records) {
    out.records.push_back(
        {r.account_id, r.time, assign_state(r.paid, r.scheduled, thr), r.covariates});
  }
  return out;
}

// One per-transition-type binary panel. Rows are grouped by account in
// sorted account-id order; within an account, times are strictly increasing.
struct TransitionPanel {
  StatePair pair;
  std::vector<std::string> covariate_names;
  std::vector<AccountId> account_ids;   // sorted, one per account with rows
  std::vector<std::size_t> offsets;     // size n_accounts()+1, row ranges
  std::vector<int> times;               // per row
  std::vector<std::uint8_t> outcomes;   // per row, y in {0,1}
  std::vector<double> x;                // row-major, n_rows x n_covariates

  std::size_t n_rows() const { return times.size(); }
  std::size_t n_accounts() const { return account_ids.size(); }
  std::size_t n_covariates() const { return covariate_names.size(); }
  std::span<const double> x_row(std::size_t r) const {
    return {x.data() + r * n_covariates(), n_covariates()};
  }

  // N_hj(t): rows at time t equal the accounts at risk contributing at t.
  std::map<int, std::size_t> risk_counts() const {
    std::map<int, std::size_t> out;
    for (int t : times) ++out[t];
    return out;
  }
};

struct TransitionRow {
  AccountId account_id;
  int time = 0;
  int outcome = 0;
  std::vector<double> covariates;
};

// Groups rows by account (sorted) and time; the flat layout is what the
// likelihood evaluators consume.
inline TransitionPanel make_transition_panel(StatePair pair,
                                             std::vector<std::string> covariate_names,
                                             std::vector<TransitionRow> rows) {
  for (const auto& r : rows) {
    if (r.covariates.size() != covariate_names.size()) {
      throw ParseError("transition panel: covariate count mismatch for account " +
                       r.account_id);
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.account_id != b.account_id) return a.account_id < b.account_id;
    return a.time < b.time;
  });
  TransitionPanel p;
  p.pair = pair;
  p.covariate_names = std::move(covariate_names);
  const std::size_t ncov = p.covariate_names.size();
  p.times.reserve(rows.size());
  p.outcomes.reserve(rows.size());
  p.x.reserve(rows.size() * ncov);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (p.account_ids.empty() || p.account_ids.back() != rows[i].account_id) {
      p.account_ids.push_back(rows[i].account_id);
      p.offsets.push_back(i);
    }
    p.times.push_back(rows[i].time);
    p.outcomes.push_back(static_cast<std::uint8_t>(rows[i].outcome != 0));
    p.x.insert(p.x.end(), rows[i].covariates.begin(), rows[i].covariates.end());
  }
  p.offsets.push_back(rows.size());
  return p;
}

// Binary outcome panels per modeled pair. An account-time contributes to
// every modeled panel with the matching origin; realized destinations outside
// the spec still contribute y=0 rows (transition-specific censoring). A gap
// in an account's time series breaks risk-set membership at the gap.
inline std::map<StatePair, TransitionPanel> build_transition_panels(
    const StatePanel& panel, const TransitionSpec& spec) {
  validate(spec);
  const std::size_t ncov = panel.covariate_names.size();
  for (const auto& r : panel.records) {
    if (r.covariates.size() != ncov) {
      throw ParseError("build_transition_panels: covariate count mismatch for account " +
                       r.account_id + " at time " + std::to_string(r.time));
    }
    if (r.time < 1) {
      throw std::invalid_argument("build_transition_panels: time must be >= 1");
    }
    if (r.state < 1 || r.state > 3) {
      throw std::invalid_argument("build_transition_panels: state must be in {1,2,3}");
    }
  }

  std::vector<std::size_t> order(panel.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = panel.records[a];
    const auto& rb = panel.records[b];
    if (ra.account_id != rb.account_id) return ra.account_id < rb.account_id;
    return ra.time < rb.time;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& prev = panel.records[order[k - 1]];
    const auto& cur = panel.records[order[k]];
    if (prev.account_id == cur.account_id && prev.time == cur.time) {
      throw std::invalid_argument("build_transition_panels: duplicate (account,time): " +
                                  cur.account_id + ", t=" + std::to_string(cur.time));
    }
  }

  std::map<StatePair, std::vector<TransitionRow>> rows;
  for (const auto& p : spec.pairs) rows[p];

  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& prev = panel.records[order[k - 1]];
    const auto& cur = panel.records[order[k]];
    if (prev.account_id != cur.account_id) continue;
    if (cur.time != prev.time + 1) continue;  // gap breaks the chain
    const int h = prev.state;
    const int j = cur.state;
    for (const auto& pair : spec.pairs) {
      if (pair.from != h) continue;
      rows[pair].push_back(
          {cur.account_id, cur.time, pair.to == j ? 1 : 0, cur.covariates});
    }
  }

  std::map<StatePair, TransitionPanel> out;
  for (auto& [pair, rs] : rows) {
    out.emplace(pair, make_transition_panel(pair, panel.covariate_names, std::move(rs)));
  }
  return out;
}

inline std::map<StatePair, TransitionPanel> build_transition_panels(
    const RepaymentPanel& panel, const StateThresholds& thr,
    const TransitionSpec& spec) {
  return build_transition_panels(to_state_panel(panel, thr), spec);
}

// ---------------------------------------------------------------------------
// CSV formats. All files are UTF-8, comma separated, '.' decimal, header row
// required. Account ids must not contain commas.
//   repayment panel:  account_id,time,paid,scheduled,<covariate...>
//   state panel:      account_id,time,state,<covariate...>
//   transition panel: account_id,time,y,<covariate...>
// ---------------------------------------------------------------------------

namespace csv_detail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
    out.back().pop_back();
  }
  return out;
}

inline double parse_double(const std::string& cell, std::size_t row,
                           const std::string& col) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError("row " + std::to_string(row) + ": non-numeric value '" + cell +
                     "' in column '" + col + "'");
  }
  return v;
}

inline long parse_int(const std::string& cell, std::size_t row,
                      const std::string& col) {
  long v = 0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError("row " + std::to_string(row) + ": non-integer value '" + cell +
                     "' in column '" + col + "'");
  }
  return v;
}

struct Header {
  std::vector<std::string> covariate_names;
  std::size_t n_fixed = 0;
};

inline Header read_header(std::istream& in, const std::vector<std::string>& fixed,
                          const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file, header required");
  auto cells = split(line);
  if (cells.size() < fixed.size()) {
    throw ParseError(path + ": header must start with the required columns");
  }
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (cells[i] != fixed[i]) {
      throw ParseError(path + ": missing required column '" + fixed[i] +
                       "' (found '" + cells[i] + "')");
    }
  }
  Header h;
  h.n_fixed = fixed.size();
  h.covariate_names.assign(cells.begin() + fixed.size(), cells.end());
  return h;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace csv_detail

inline RepaymentPanel read_repayment_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  auto header = csv_detail::read_header(in, {"account_id", "time", "paid", "scheduled"}, path);
  RepaymentPanel panel;
  panel.covariate_names = header.covariate_names;
  std::set<std::pair<AccountId, int>> seen;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = csv_detail::split(line);
    if (cells.size() != header.n_fixed + header.covariate_names.size()) {
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(header.n_fixed + header.covariate_names.size()) +
                       " cells, got " + std::to_string(cells.size()));
    }
    PanelRecord r;
    r.account_id = cells[0];
    r.time = static_cast<int>(csv_detail::parse_int(cells[1], row, "time"));
    r.paid = csv_detail::parse_double(cells[2], row, "paid");
    r.scheduled = csv_detail::parse_double(cells[3], row, "scheduled");
    if (r.time < 1) throw ParseError("row " + std::to_string(row) + ": time must be >= 1");
    if (!(r.scheduled > 0.0)) {
      throw ParseError("row " + std::to_string(row) + ": scheduled must be > 0");
    }
    if (r.paid < 0.0) {
      throw ParseError("row " + std::to_string(row) + ": paid must be >= 0");
    }
    if (!seen.insert({r.account_id, r.time}).second) {
      throw ParseError("row " + std::to_string(row) + ": duplicate (account,time): " +
                       r.account_id + ", t=" + std::to_string(r.time));
    }
    for (std::size_t c = 0; c < header.covariate_names.size(); ++c) {
      r.covariates.push_back(csv_detail::parse_double(cells[header.n_fixed + c], row,
                                                      header.covariate_names[c]));
    }
    panel.records.push_back(std::move(r));
  }
  return panel;
}

inline void write_repayment_csv(const RepaymentPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "account_id,time,paid,scheduled";
  for (const auto& n : panel.covariate_names) out << ',' << n;
  out << '\n';
  for (const auto& r : panel.records) {
    out << r.account_id << ',' << r.time << ',' << csv_detail::fmt(r.paid) << ','
        << csv_detail::fmt(r.scheduled);
    for (double v : r.covariates) out << ',' << csv_detail::fmt(v);
    out << '\n';
  }
}

inline StatePanel read_state_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  auto header = csv_detail::read_header(in, {"account_id", "time", "state"}, path);
  StatePanel panel;
  panel.covariate_names = header.covariate_names;
  std::set<std::pair<AccountId, int>> seen;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = csv_detail::split(line);
    if (cells.size() != header.n_fixed + header.covariate_names.size()) {
      throw ParseError("row " + std::to_string(row) + ": wrong cell count");
    }
    StateRecord r;
    r.account_id = cells[0];
    r.time = static_cast<int>(csv_detail::parse_int(cells[1], row, "time"));
    r.state = static_cast<int>(csv_detail::parse_int(cells[2], row, "state"));
    if (r.time < 1) throw ParseError("row " + std::to_string(row) + ": time must be >= 1");
    if (r.state < 1 || r.state > 3) {
      throw ParseError("row " + std::to_string(row) + ": state must be 1, 2 or 3");
    }
    if (!seen.insert({r.account_id, r.time}).second) {
      throw ParseError("row " + std::to_string(row) + ": duplicate (account,time)");
    }
    for (std::size_t c = 0; c < header.covariate_names.size(); ++c) {
      r.covariates.push_back(csv_detail::parse_double(cells[header.n_fixed + c], row,
                                                      header.covariate_names[c]));
    }
    panel.records.push_back(std::move(r));
  }
  return panel;
}

inline void write_state_csv(const StatePanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "account_id,time,state";
  for (const auto& n : panel.covariate_names) out << ',' << n;
  out << '\n';
  for (const auto& r : panel.records) {
    out << r.account_id << ',' << r.time << ',' << r.state;
    for (double v : r.covariates) out << ',' << csv_detail::fmt(v);
    out << '\n';
  }
}

inline TransitionPanel read_transition_csv(const std::string& path, StatePair pair) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  auto header = csv_detail::read_header(in, {"account_id", "time", "y"}, path);
  std::vector<TransitionRow> rows;
  std::set<std::pair<AccountId, int>> seen;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = csv_detail::split(line);
    if (cells.size() != header.n_fixed + header.covariate_names.size()) {
      throw ParseError("row " + std::to_string(row) + ": wrong cell count");
    }
    TransitionRow r;
    r.account_id = cells[0];
    r.time = static_cast<int>(csv_detail::parse_int(cells[1], row, "time"));
    const long y = csv_detail::parse_int(cells[2], row, "y");
    if (r.time < 1) throw ParseError("row " + std::to_string(row) + ": time must be >= 1");
    if (y != 0 && y != 1) {
      throw ParseError("row " + std::to_string(row) + ": y must be 0 or 1");
    }
    r.outcome = static_cast<int>(y);
    if (!seen.insert({r.account_id, r.time}).second) {
      throw ParseError("row " + std::to_string(row) + ": duplicate (account,time)");
    }
    for (std::size_t c = 0; c < header.covariate_names.size(); ++c) {
      r.covariates.push_back(csv_detail::parse_double(cells[header.n_fixed + c], row,
                                                      header.covariate_names[c]));
    }
    rows.push_back(std::move(r));
  }
  return make_transition_panel(pair, header.covariate_names, std::move(rows));
}

inline void write_transition_csv(const TransitionPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "account_id,time,y";
  for (const auto& n : panel.covariate_names) out << ',' << n;
  out << '\n';
  for (std::size_t a = 0; a < panel.n_accounts(); ++a) {
    for (std::size_t r = panel.offsets[a]; r < panel.offsets[a + 1]; ++r) {
      out << panel.account_ids[a] << ',' << panel.times[r] << ','
          << static_cast<int>(panel.outcomes[r]);
      for (double v : panel.x_row(r)) out << ',' << csv_detail::fmt(v);
      out << '\n';
    }
  }
}

}  // namespace msfrail

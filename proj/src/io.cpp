#include "tdr/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "tdr/errors.hpp"

namespace tdr {

namespace {

template <class T>
T parse_field(const std::string& text, std::string_view what, std::size_t line_no) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw InvalidInput(fmt::format("line {}: bad {} '{}'", line_no, what, text));
  return value;
}

// key=value pairs from a "# k=v k=v" comment line.
std::map<std::string, std::string> parse_comment(const std::string& line) {
  std::map<std::string, std::string> out;
  std::istringstream ss(line.substr(1));
  std::string token;
  while (ss >> token) {
    const auto eq = token.find('=');
    if (eq != std::string::npos) out[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return out;
}

std::string alpha_column(const TruncationSchedule& s) {
  switch (s.mode) {
    case TruncationMode::none: return "";
    case TruncationMode::fixed: return fmt::format("{}", s.level);
    default: return fmt::format("{}", s.alpha);
  }
}

}  // namespace

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput(fmt::format("cannot open '{}'", path.string()));
  return in;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  if (!traj.is_contiguous()) throw InvalidInput("write_trajectory_csv: trajectory has seams");
  fmt::print(out, "t,state,action,reward\n");
  for (std::size_t t = 0; t < traj.size(); ++t)
    fmt::print(out, "{},{},{},{}\n", t, traj[t].state, traj[t].action, traj[t].reward);
  if (!traj.empty()) fmt::print(out, "{},{},,\n", traj.size(), traj.terminal_state());
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw InvalidInput("trajectory CSV: empty input");
  ++line_no;
  if (split_csv_line(line) != std::vector<std::string>{"t", "state", "action", "reward"})
    throw InvalidInput("trajectory CSV: expected header 't,state,action,reward'");

  struct Row {
    State s;
    Action a;
    double r;
  };
  std::vector<Row> rows;
  std::optional<State> terminal;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (terminal) throw InvalidInput(fmt::format("line {}: data after the terminal row", line_no));
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw InvalidInput(fmt::format("line {}: expected 4 fields", line_no));
    const auto t = parse_field<std::size_t>(f[0], "index", line_no);
    if (t != rows.size()) throw InvalidInput(fmt::format("line {}: index {} out of sequence", line_no, t));
    const auto s = parse_field<State>(f[1], "state", line_no);
    if (f[2].empty() && f[3].empty()) {
      terminal = s;
      continue;
    }
    const auto a = parse_field<Action>(f[2], "action", line_no);
    if (a != 0 && a != 1) throw InvalidInput(fmt::format("line {}: action must be 0 or 1", line_no));
    rows.push_back({s, a, parse_field<double>(f[3], "reward", line_no)});
  }
  Trajectory traj;
  const std::size_t n = terminal ? rows.size() : (rows.empty() ? 0 : rows.size() - 1);
  for (std::size_t t = 0; t < n; ++t) {
    const State next = t + 1 < rows.size() ? rows[t + 1].s : *terminal;
    traj.steps.push_back({rows[t].s, rows[t].a, rows[t].r, next});
  }
  if (traj.empty()) throw InvalidInput("trajectory CSV: no complete transitions");
  return traj;
}

void write_qtable_csv(std::ostream& out, const QTable& q) {
  fmt::print(out, "# kind={} gamma={} theta_hat={} fallback={}\n",
             q.kind() == QKind::discounted ? "discounted" : "differential", q.gamma(), q.theta_hat(), q.fallback());
  fmt::print(out, "state,action,value\n");
  for (const auto& e : q.entries()) fmt::print(out, "{},{},{}\n", e.state, e.action, e.value);
}

QTable read_qtable_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::string> meta;
  bool header = false;
  std::optional<QTable> q;
  auto make = [&] {
    const std::string kind = meta.contains("kind") ? meta["kind"] : "discounted";
    const double fallback = meta.contains("fallback") ? parse_field<double>(meta["fallback"], "fallback", 1) : 0.0;
    if (kind == "discounted") {
      if (!meta.contains("gamma")) throw InvalidInput("Q table CSV: discounted table needs gamma in the header");
      return QTable::discounted(parse_field<double>(meta["gamma"], "gamma", 1), fallback);
    }
    if (kind == "differential")
      return QTable::differential(
          meta.contains("theta_hat") ? parse_field<double>(meta["theta_hat"], "theta_hat", 1) : 0.0, fallback);
    throw InvalidInput(fmt::format("Q table CSV: unknown kind '{}'", kind));
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') {
      if (!header) meta = parse_comment(line);
      continue;
    }
    if (!header) {
      if (split_csv_line(line) != std::vector<std::string>{"state", "action", "value"})
        throw InvalidInput("Q table CSV: expected header 'state,action,value'");
      header = true;
      q = make();
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw InvalidInput(fmt::format("line {}: expected 3 fields", line_no));
    q->set(parse_field<State>(f[0], "state", line_no), parse_field<Action>(f[1], "action", line_no),
           parse_field<double>(f[2], "value", line_no));
  }
  if (!q) throw InvalidInput("Q table CSV: missing header");
  return *q;
}

void write_omega_csv(std::ostream& out, const DensityRatioTable& omega) {
  if (omega.kind() == RatioKind::discounted)
    fmt::print(out, "# kind=discounted gamma={} p0={}\n", omega.gamma(), omega.p0_label());
  else
    fmt::print(out, "# kind=longrun\n");
  fmt::print(out, "state,omega\n");
  for (const auto& e : omega.entries()) fmt::print(out, "{},{}\n", e.state, e.omega);
}

DensityRatioTable read_omega_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::string> meta;
  std::optional<DensityRatioTable> omega;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') {
      if (!omega) meta = parse_comment(line);
      continue;
    }
    if (!omega) {
      if (split_csv_line(line) != std::vector<std::string>{"state", "omega"})
        throw InvalidInput("density ratio CSV: expected header 'state,omega'");
      if (meta["kind"] == "discounted")
        omega.emplace(RatioKind::discounted, parse_field<double>(meta["gamma"], "gamma", 1), meta["p0"]);
      else
        omega.emplace(RatioKind::longrun);
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 2) throw InvalidInput(fmt::format("line {}: expected 2 fields", line_no));
    omega->set(parse_field<State>(f[0], "state", line_no), parse_field<double>(f[1], "omega", line_no));
  }
  if (!omega) throw InvalidInput("density ratio CSV: missing header");
  return *omega;
}

void write_estimator_header(std::ostream& out) {
  fmt::print(out, "estimator,schedule_mode,alpha,T,estimate,variance,n_truncated\n");
}

void write_estimator_row(std::ostream& out, const EstimatorResult& r) {
  fmt::print(out, "{},{},{},{},{},{},{}\n", r.estimator, r.schedule.mode_name(), alpha_column(r.schedule), r.horizon,
             r.estimate, r.plug_in_variance ? fmt::format("{}", *r.plug_in_variance) : std::string(), r.n_truncated);
}

void write_lepski_csv(std::ostream& out, const LepskiOutcome& outcome) {
  fmt::print(out, "grid_index,alpha,mean,sd,lo,hi,selected\n");
  for (std::size_t g = 0; g < outcome.intervals.size(); ++g) {
    const auto& ci = outcome.intervals[g];
    fmt::print(out, "{},{},{},{},{},{},{}\n", g, alpha_column(outcome.grid[g]), ci.mean, ci.sd, ci.lo, ci.hi,
               g == outcome.selected_index ? 1 : 0);
  }
}

}  // namespace tdr

#pragma once

// Grid files and experiment reports (TSV, aligned text, JSON-lines loss log,
// comparison against the published diagnosis table).

#include <algorithm>
#include <array>
#include <cstdio>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "eval.hpp"
#include "wavelet.hpp"

namespace mammo::report {

// Grid file: one experiment per line, whitespace separated:
//   id S MC wavelet eta max_epochs seed
// Blank lines and lines starting with '#' are ignored.
inline std::vector<eval::ExperimentConfig> parse_grid(std::istream& in) {
  std::vector<eval::ExperimentConfig> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<std::string> tok{std::istream_iterator<std::string>(ss), std::istream_iterator<std::string>()};
    if (tok.empty() || tok[0][0] == '#') continue;
    const std::string where = "grid line " + std::to_string(line_no) + ": ";
    if (tok.size() != 7) throw ValidationError(where + "expected 7 fields (id S MC wavelet eta max_epochs seed)");
    eval::ExperimentConfig c;
    try {
      std::size_t pos = 0;
      auto whole = [&pos, &where](const std::string& s, const char* what) {
        if (s.empty() || s[0] == '-') throw ValidationError(where + "bad " + what + " '" + s + "'");
        const auto v = std::stoull(s, &pos);
        if (pos != s.size()) throw ValidationError(where + "bad " + what + " '" + s + "'");
        return v;
      };
      auto real = [&pos, &where](const std::string& s, const char* what) {
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw ValidationError(where + "bad " + what + " '" + s + "'");
        return v;
      };
      c.id = static_cast<int>(whole(tok[0], "id"));
      c.hidden = whole(tok[1], "S");
      c.momentum = real(tok[2], "MC");
      c.wavelet = wavelet::parse_filter_name(tok[3]);
      c.learning_rate = real(tok[4], "eta");
      c.max_epochs = whole(tok[5], "max_epochs");
      c.seed = whole(tok[6], "seed");
      c.validate();
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      throw ValidationError(msg.rfind("grid line", 0) == 0 ? msg : where + msg);
    } catch (const std::exception& e) {
      throw ValidationError(where + "malformed field (" + e.what() + ")");
    }
    out.push_back(c);
  }
  return out;
}

inline void write_grid(std::ostream& os, const std::vector<eval::ExperimentConfig>& grid) {
  os << "# id S MC wavelet eta max_epochs seed\n";
  for (const auto& c : grid) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d %zu %.17g %s %.17g %zu %llu\n", c.id, c.hidden, c.momentum,
                  std::string(wavelet::to_string(c.wavelet)).c_str(), c.learning_rate, c.max_epochs,
                  static_cast<unsigned long long>(c.seed));
    os << buf;
  }
}

// Level-2 results of the published diagnosis table (percent), with the
// printed hidden size, momentum and wavelet of each row.
struct PublishedRow {
  int id;
  std::size_t hidden;
  double momentum;
  wavelet::FilterName wavelet;
  double specificity;
  double sensitivity;
};

inline const std::array<PublishedRow, 16>& published_table() {
  using wavelet::FilterName;
  static const std::array<PublishedRow, 16> rows = {{
      {1, 10, 0.95, FilterName::daub4, 99.5, 97.1},   {2, 10, 0.95, FilterName::daub8, 98.6, 98.0},
      {3, 10, 0.95, FilterName::daub4, 99.7, 99.0},   {4, 10, 0.95, FilterName::daub8, 100.0, 98.6},
      {5, 10, 0.80, FilterName::daub4, 99.1, 99.4},   {6, 10, 0.80, FilterName::daub8, 100.0, 98.8},
      {7, 20, 0.95, FilterName::daub4, 100.0, 98.8},  {8, 20, 0.95, FilterName::daub8, 100.0, 99.6},
      {9, 20, 0.95, FilterName::daub4, 100.0, 99.0},  {10, 20, 0.95, FilterName::daub8, 100.0, 99.6},
      {11, 30, 0.95, FilterName::daub4, 100.0, 99.1}, {12, 30, 0.95, FilterName::daub8, 99.7, 99.6},
      {13, 40, 0.80, FilterName::daub4, 99.8, 98.8},  {14, 40, 0.80, FilterName::daub8, 99.4, 98.8},
      {15, 10, 0.99, FilterName::daub4, 100.0, 98.6}, {16, 10, 0.99, FilterName::daub8, 99.7, 97.5},
  }};
  return rows;
}

// The published grid's parameter columns. Row pairs with identical printed
// parameters differ in an unprinted training-length setting, so odd
// "repeat" rows (3-4, 9-10) get twice the epoch budget here; every row gets
// its own seed.
inline std::vector<eval::ExperimentConfig> published_grid(double learning_rate, std::size_t max_epochs,
                                                          std::uint64_t base_seed = 0) {
  std::vector<eval::ExperimentConfig> out;
  for (const auto& row : published_table()) {
    eval::ExperimentConfig c;
    c.id = row.id;
    c.hidden = row.hidden;
    c.momentum = row.momentum;
    c.wavelet = row.wavelet;
    c.learning_rate = learning_rate;
    const bool repeat = row.id == 3 || row.id == 4 || row.id == 9 || row.id == 10;
    c.max_epochs = repeat ? 2 * max_epochs : max_epochs;
    c.seed = base_seed + static_cast<std::uint64_t>(row.id);
    out.push_back(c);
  }
  return out;
}

inline std::string percent(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
  return buf;
}

struct Provenance {
  std::size_t n_train = 0;
  std::size_t n_rois = 0;
  std::size_t k = features::kDefaultPerLevel;
  std::size_t levels = features::kLevels;
  std::uint64_t split_seed = 0;
};

inline void write_provenance(std::ostream& os, const Provenance& p) {
  os << "# k=" << p.k << " levels=" << p.levels << " rois=" << p.n_rois << " n_train=" << p.n_train
     << " split_seed=" << p.split_seed << '\n'
     << "# protocol columns evaluate every ROI, training ROIs included; heldout columns exclude them\n"
     << "# level-2 rates are one-vs-rest macro averages over the six lesion classes\n";
}

namespace internal {

inline std::optional<double> l2(const eval::LevelEvaluation& e, bool spec) {
  if (!e.level2) return std::nullopt;
  return spec ? e.level2->macro.specificity : e.level2->macro.sensitivity;
}

inline std::string real(double v, const char* fmt = "%.17g") {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

} // namespace internal

inline void write_tsv(std::ostream& os, const std::vector<eval::ExperimentResult>& results, const Provenance& prov) {
  write_provenance(os, prov);
  os << "exp\tS\tMC\twavelet\teta\tmax_epochs\tseed"
        "\tl2_specificity\tl2_sensitivity\tl2_heldout_specificity\tl2_heldout_sensitivity"
        "\tl1_specificity\tl1_sensitivity\tl1_heldout_specificity\tl1_heldout_sensitivity"
        "\tl3_specificity\tl3_sensitivity\tl3_heldout_specificity\tl3_heldout_sensitivity"
        "\tepochs_l1\tepochs_l2\tepochs_l3\twall_time_s\tstatus\n";
  for (const auto& r : results) {
    const auto& c = r.config;
    os << c.id << '\t' << c.hidden << '\t' << internal::real(c.momentum) << '\t' << wavelet::to_string(c.wavelet)
       << '\t' << internal::real(c.learning_rate) << '\t' << c.max_epochs << '\t' << c.seed;
    const auto& p = r.protocol;
    const auto& h = r.heldout;
    for (const auto& v : {internal::l2(p, true), internal::l2(p, false), internal::l2(h, true), internal::l2(h, false),
                          p.level1_rates.specificity, p.level1_rates.sensitivity, h.level1_rates.specificity,
                          h.level1_rates.sensitivity, p.level3_rates.specificity, p.level3_rates.sensitivity,
                          h.level3_rates.specificity, h.level3_rates.sensitivity})
      os << '\t' << percent(r.error ? std::nullopt : v);
    for (const auto& t : r.training) os << '\t' << t.epochs_run;
    os << '\t' << internal::real(r.wall_time, "%.2f") << '\t' << (r.error ? "error: " + *r.error : "ok") << '\n';
  }
}

inline void write_table(std::ostream& os, const std::vector<eval::ExperimentResult>& results, const Provenance& prov) {
  write_provenance(os, prov);
  const std::vector<std::string> head = {"Exp #",       "S",           "MC",           "Wavelet",      "Specificity",
                                         "Sensitivity", "Held-out Sp", "Held-out Se", "L1 Sp",       "L1 Se",
                                         "L3 Sp",       "L3 Se",       "Status"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : results) {
    const auto& c = r.config;
    const bool ok = !r.error;
    auto pc = [ok](const std::optional<double>& v) { return percent(ok ? v : std::nullopt); };
    rows.push_back({std::to_string(c.id), std::to_string(c.hidden), internal::real(c.momentum, "%.2f"),
                    c.wavelet == wavelet::FilterName::daub4 ? "D-4" : "D-8", pc(internal::l2(r.protocol, true)),
                    pc(internal::l2(r.protocol, false)), pc(internal::l2(r.heldout, true)),
                    pc(internal::l2(r.heldout, false)), pc(r.protocol.level1_rates.specificity),
                    pc(r.protocol.level1_rates.sensitivity), pc(r.protocol.level3_rates.specificity),
                    pc(r.protocol.level3_rates.sensitivity), ok ? "ok" : "error: " + *r.error});
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t i = 0; i < head.size(); ++i) width[i] = head[i].size();
  for (const auto& row : rows)
    for (std::size_t i = 0; i + 1 < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      os << row[i];
      if (i + 1 < row.size()) os << std::string(width[i] - row[i].size() + 2, ' ');
    }
    os << '\n';
  };
  emit(head);
  for (const auto& row : rows) emit(row);
}

// Measured level-2 protocol rates next to the published ones, for rows whose
// id and printed parameters (S, MC, wavelet) match a published row.
inline void write_comparison(std::ostream& os, const std::vector<eval::ExperimentResult>& results) {
  os << "Exp #  S   MC    Wavelet  Published Sp  Published Se  Measured Sp  Measured Se  Held-out Sp  Held-out Se\n";
  for (const auto& r : results) {
    const auto& table = published_table();
    const auto it = std::find_if(table.begin(), table.end(), [&r](const PublishedRow& p) {
      return p.id == r.config.id && p.hidden == r.config.hidden && p.momentum == r.config.momentum &&
             p.wavelet == r.config.wavelet;
    });
    if (it == table.end()) continue;
    const bool ok = !r.error;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-6d %-3zu %-5.2f %-8s %-13.1f %-13.1f %-12s %-12s %-12s %s\n", r.config.id,
                  r.config.hidden, r.config.momentum, r.config.wavelet == wavelet::FilterName::daub4 ? "D-4" : "D-8",
                  it->specificity, it->sensitivity, percent(ok ? internal::l2(r.protocol, true) : std::nullopt).c_str(),
                  percent(ok ? internal::l2(r.protocol, false) : std::nullopt).c_str(),
                  percent(ok ? internal::l2(r.heldout, true) : std::nullopt).c_str(),
                  percent(ok ? internal::l2(r.heldout, false) : std::nullopt).c_str());
    os << buf;
  }
}

// One JSON object per (experiment, level) with the epoch loss curve.
inline void write_loss_log(std::ostream& os, const std::vector<eval::ExperimentResult>& results) {
  for (const auto& r : results) {
    for (std::size_t level = 0; level < r.training.size(); ++level) {
      const auto& t = r.training[level];
      nlohmann::json j;
      j["exp"] = r.config.id;
      j["level"] = level + 1;
      j["epochs_run"] = t.epochs_run;
      j["final_train_accuracy"] = t.final_train_accuracy;
      j["stopped_by"] = std::string(nn::to_string(t.stopped_by));
      j["epoch_losses"] = t.epoch_losses;
      os << j.dump() << '\n';
    }
  }
}

} // namespace mammo::report

#include "ipe/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "ipe/error.hpp"

namespace ipe {

namespace {

constexpr const char* kModule = "io";

[[noreturn]] void fail(ErrorCode code, const std::string& message) { throw Error(code, kModule, message); }

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // source line number of each row
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        std::string cell = line.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
        const auto b = cell.find_first_not_of(" \t");
        const auto e = cell.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

CsvTable read_table(std::istream& in, const std::string& source) {
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto cells = split(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size()) {
            fail(ErrorCode::Schema, source + " line " + std::to_string(lineno) + ": expected " +
                                        std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
        }
        t.rows.push_back(std::move(cells));
        t.lines.push_back(lineno);
    }
    if (!have_header) fail(ErrorCode::Schema, source + " is empty (no header row)");
    return t;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
}

void check_header(const CsvTable& t, const std::vector<std::string>& expected, const std::string& source) {
    if (t.header != expected) {
        fail(ErrorCode::Schema, source + " header mismatch: expected '" + join(expected) + "', found '" + join(t.header) + "'");
    }
}

std::size_t covariate_start(const std::vector<std::string>& header, std::size_t fixed, const std::string& source) {
    for (std::size_t c = fixed; c < header.size(); ++c) {
        if (!is_covariate_name(header[c])) fail(ErrorCode::Schema, source + ": unexpected column '" + header[c] + "'");
    }
    return fixed;
}

// Collects non-finite / unparseable cells so that all offending rows are reported.
class CellReader {
public:
    explicit CellReader(std::string source) : source_(std::move(source)) {}

    double number(const std::string& cell, std::size_t line, const std::string& column) {
        double v = 0.0;
        const char* first = cell.data();
        const char* last = cell.data() + cell.size();
        const auto res = std::from_chars(first, last, v);
        if (cell.empty() || res.ec != std::errc() || res.ptr != last) {
            note(line, column, cell.empty() ? "missing value" : "not a number '" + cell + "'");
            return 0.0;
        }
        if (!std::isfinite(v)) note(line, column, "non-finite value '" + cell + "'");
        return v;
    }
    std::optional<double> optional_number(const std::string& cell, std::size_t line, const std::string& column) {
        if (cell.empty()) return std::nullopt;
        return number(cell, line, column);
    }
    std::int64_t integer(const std::string& cell, std::size_t line, const std::string& column) {
        std::int64_t v = 0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
            note(line, column, "not an integer '" + cell + "'");
        }
        return v;
    }
    void finish() const {
        if (problems_.empty()) return;
        std::string msg = source_ + ": " + std::to_string(count_) + " invalid value(s): ";
        for (std::size_t i = 0; i < problems_.size(); ++i) msg += (i ? "; " : "") + problems_[i];
        if (count_ > problems_.size()) msg += "; ...";
        fail(ErrorCode::Validation, msg);
    }

private:
    void note(std::size_t line, const std::string& column, const std::string& what) {
        ++count_;
        if (problems_.size() < 20) problems_.push_back("line " + std::to_string(line) + " column " + column + ": " + what);
    }
    std::string source_;
    std::vector<std::string> problems_;
    std::size_t count_ = 0;
};

DesignKind kind_from_groups(const std::vector<Group>& groups, const std::string& source) {
    bool passive = false, active = false;
    for (Group g : groups) (g == Group::C || g == Group::T ? passive : active) = true;
    if (passive && active) fail(ErrorCode::Validation, source + " mixes passive (C/T) and active (L/H) groups");
    return active ? DesignKind::Active : DesignKind::Passive;
}

Group read_group(const std::string& cell, std::size_t line, const std::string& source) {
    try {
        return parse_group(cell);
    } catch (const Error& e) {
        fail(ErrorCode::Validation, source + " line " + std::to_string(line) + ": " + e.what());
    }
}

std::vector<std::string> records_header(DesignKind kind, const std::vector<std::string>& covariates) {
    std::vector<std::string> h{"id", "group", "signal"};
    if (kind == DesignKind::Active) {
        h.push_back("signal_low");
        h.push_back("signal_high");
    }
    for (const char* c : {"prior_feature", "posterior_feature", "outcome"}) h.emplace_back(c);
    h.insert(h.end(), covariates.begin(), covariates.end());
    return h;
}

std::vector<std::string> panel_header(DesignKind kind, const std::vector<std::string>& covariates) {
    std::vector<std::string> h;
    if (kind == DesignKind::Passive) {
        h = {"id", "group", "signal", "prior_feature", "posterior_C", "posterior_T", "outcome_C", "outcome_T", "within_ape"};
    } else {
        h = {"id", "group", "signal_low", "signal_high", "prior_feature", "posterior_L", "posterior_H", "outcome_L",
             "outcome_H", "within_ape"};
    }
    h.insert(h.end(), covariates.begin(), covariates.end());
    return h;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& what) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        fail(ErrorCode::Validation, what + ": not a number '" + std::string(text) + "'");
    }
    return v;
}

bool is_covariate_name(std::string_view name) {
    if (name.size() < 2 || name[0] != 'x') return false;
    return std::all_of(name.begin() + 1, name.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    });
}

void write_records_csv(std::ostream& out, const RecordSet& records) {
    out << join(records_header(records.kind, records.covariate_names)) << '\n';
    for (const auto& r : records.rows) {
        out << r.id << ',' << to_string(r.group) << ',';
        if (records.kind == DesignKind::Passive) {
            out << opt(r.signal_t);
        } else {
            out << opt(r.received_signal()) << ',' << opt(r.signal_l) << ',' << opt(r.signal_h);
        }
        out << ',' << format_double(r.prior_feature) << ',' << format_double(r.posterior_feature) << ','
            << format_double(r.outcome);
        for (double x : r.covariates) out << ',' << format_double(x);
        out << '\n';
    }
}

void write_panel_csv(std::ostream& out, const Panel& panel) {
    out << join(panel_header(panel.kind, panel.covariate_names)) << '\n';
    for (const auto& r : panel.rows) {
        out << r.id << ',' << to_string(r.group) << ',';
        if (panel.kind == DesignKind::Passive) {
            out << opt(r.signal_t);
        } else {
            out << opt(r.signal_l) << ',' << opt(r.signal_h);
        }
        for (double v : {r.prior_feature, r.posterior_base, r.posterior_alt, r.outcome_base, r.outcome_alt, r.within_ape}) {
            out << ',' << format_double(v);
        }
        for (double x : r.covariates) out << ',' << format_double(x);
        out << '\n';
    }
}

RecordSet read_records_csv(std::istream& in, IngestMode mode, const std::string& source) {
    const CsvTable t = read_table(in, source);
    std::map<std::string, std::size_t> col;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (!col.emplace(t.header[c], c).second) fail(ErrorCode::Schema, source + ": duplicate column '" + t.header[c] + "'");
    }

    RecordSet out;
    std::vector<std::size_t> cov_cols;
    if (mode == IngestMode::Simulated) {
        const DesignKind kind = col.count("signal_low") ? DesignKind::Active : DesignKind::Passive;
        const std::size_t fixed = kind == DesignKind::Active ? 8 : 6;
        covariate_start(t.header, std::min(fixed, t.header.size()), source);
        out.covariate_names.assign(t.header.begin() + static_cast<std::ptrdiff_t>(std::min(fixed, t.header.size())), t.header.end());
        check_header(t, records_header(kind, out.covariate_names), source);
        out.kind = kind;
    } else {
        static const std::vector<std::string> required{"group", "signal", "prior_feature", "posterior_feature", "outcome"};
        for (const auto& r : required)
            if (!col.count(r)) fail(ErrorCode::Schema, source + ": missing required column '" + r + "'");
        for (const auto& h : t.header) {
            const bool known = std::find(required.begin(), required.end(), h) != required.end() || h == "id" ||
                               h == "signal_low" || h == "signal_high";
            if (known) continue;
            if (!is_covariate_name(h)) fail(ErrorCode::Schema, source + ": unexpected column '" + h + "'");
            out.covariate_names.push_back(h);
        }
    }
    for (const auto& name : out.covariate_names) cov_cols.push_back(col.at(name));

    std::vector<Group> groups;
    groups.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) groups.push_back(read_group(t.rows[r][col.at("group")], t.lines[r], source));
    if (mode == IngestMode::External) out.kind = kind_from_groups(groups, source);
    const bool passive = out.kind == DesignKind::Passive;
    for (Group g : groups) {
        if ((g == Group::C || g == Group::T) != passive) {
            fail(ErrorCode::Validation, source + ": group " + std::string(to_string(g)) + " does not belong to a " +
                                            std::string(to_string(out.kind)) + " file");
        }
    }

    CellReader reader(source);
    const auto idc = col.find("id");
    const auto lowc = col.find("signal_low");
    const auto highc = col.find("signal_high");
    out.rows.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& cells = t.rows[r];
        const std::size_t line = t.lines[r];
        ExperimentRecord rec;
        rec.id = idc != col.end() ? reader.integer(cells[idc->second], line, "id") : static_cast<std::int64_t>(r + 1);
        rec.group = groups[r];
        const std::string& signal_cell = cells[col.at("signal")];
        if (passive) {
            if (signal_cell.empty()) {
                fail(ErrorCode::Schema, source + " line " + std::to_string(line) +
                                            ": passive files need the treated signal S^T on every row, control rows included");
            }
            rec.signal_t = reader.number(signal_cell, line, "signal");
        } else {
            const auto received = reader.optional_number(signal_cell, line, "signal");
            if (lowc != col.end()) rec.signal_l = reader.optional_number(cells[lowc->second], line, "signal_low");
            if (highc != col.end()) rec.signal_h = reader.optional_number(cells[highc->second], line, "signal_high");
            if (received) {
                auto& slot = rec.group == Group::H ? rec.signal_h : rec.signal_l;
                if (!slot) slot = received;
                else if (*slot != *received) {
                    fail(ErrorCode::Validation, source + " line " + std::to_string(line) +
                                                    ": signal disagrees with the signal of the assigned arm");
                }
            }
        }
        rec.prior_feature = reader.number(cells[col.at("prior_feature")], line, "prior_feature");
        rec.posterior_feature = reader.number(cells[col.at("posterior_feature")], line, "posterior_feature");
        rec.outcome = reader.number(cells[col.at("outcome")], line, "outcome");
        for (std::size_t k = 0; k < cov_cols.size(); ++k) {
            rec.covariates.push_back(reader.number(cells[cov_cols[k]], line, out.covariate_names[k]));
        }
        out.rows.push_back(std::move(rec));
    }
    reader.finish();
    return out;
}

RecordSet ingest(const std::string& path, IngestMode mode) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open records file '" + path + "'");
    return read_records_csv(in, mode, path);
}

Panel read_panel_csv(std::istream& in, const std::string& source) {
    const CsvTable t = read_table(in, source);
    Panel out;
    out.kind = std::find(t.header.begin(), t.header.end(), "signal_low") != t.header.end() ? DesignKind::Active
                                                                                              : DesignKind::Passive;
    const std::size_t fixed = out.kind == DesignKind::Passive ? 9 : 10;
    covariate_start(t.header, std::min(fixed, t.header.size()), source);
    out.covariate_names.assign(t.header.begin() + static_cast<std::ptrdiff_t>(std::min(fixed, t.header.size())), t.header.end());
    check_header(t, panel_header(out.kind, out.covariate_names), source);

    CellReader reader(source);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& c = t.rows[r];
        const std::size_t line = t.lines[r];
        PanelRow row;
        row.id = reader.integer(c[0], line, "id");
        row.group = read_group(c[1], line, source);
        if ((row.group == Group::C || row.group == Group::T) != (out.kind == DesignKind::Passive)) {
            fail(ErrorCode::Validation, source + " line " + std::to_string(line) + ": group does not match the panel kind");
        }
        std::size_t k = 2;
        if (out.kind == DesignKind::Passive) {
            row.signal_t = reader.number(c[k++], line, "signal");
        } else {
            row.signal_l = reader.number(c[k++], line, "signal_low");
            row.signal_h = reader.number(c[k++], line, "signal_high");
        }
        row.prior_feature = reader.number(c[k], line, t.header[k]); ++k;
        row.posterior_base = reader.number(c[k], line, t.header[k]); ++k;
        row.posterior_alt = reader.number(c[k], line, t.header[k]); ++k;
        row.outcome_base = reader.number(c[k], line, t.header[k]); ++k;
        row.outcome_alt = reader.number(c[k], line, t.header[k]); ++k;
        row.within_ape = reader.number(c[k], line, t.header[k]); ++k;
        for (; k < c.size(); ++k) row.covariates.push_back(reader.number(c[k], line, t.header[k]));
        out.rows.push_back(std::move(row));
    }
    reader.finish();
    return out;
}

Panel read_panel_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open panel file '" + path + "'");
    return read_panel_csv(in, path);
}

void write_grid_belief_csv(std::ostream& out, const GridBelief& belief) {
    out << "state,mass\n";
    for (std::size_t m = 0; m < belief.size(); ++m) {
        out << format_double(belief.states()[m]) << ',' << format_double(belief.masses()[m]) << '\n';
    }
}

GridBelief read_grid_belief_csv(std::istream& in, const std::string& source) {
    const CsvTable t = read_table(in, source);
    check_header(t, {"state", "mass"}, source);
    CellReader reader(source);
    std::vector<double> states, masses;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        states.push_back(reader.number(t.rows[r][0], t.lines[r], "state"));
        masses.push_back(reader.number(t.rows[r][1], t.lines[r], "mass"));
    }
    reader.finish();
    return GridBelief(std::move(states), std::move(masses));
}

void write_signal_family_csv(std::ostream& out, const SignalFamily& family) {
    out << "signal,quad_weight";
    for (double w : family.states()) out << ',' << format_double(w);
    out << '\n';
    for (std::size_t j = 0; j < family.signal_count(); ++j) {
        out << format_double(family.signals()[j]) << ',' << format_double(family.quad_weights()[j]);
        for (std::size_t m = 0; m < family.state_count(); ++m) out << ',' << format_double(family.density(j, m));
        out << '\n';
    }
}

SignalFamily read_signal_family_csv(std::istream& in, const std::string& source) {
    const CsvTable t = read_table(in, source);
    if (t.header.size() < 3 || t.header[0] != "signal" || t.header[1] != "quad_weight") {
        fail(ErrorCode::Schema, source + ": header must be 'signal,quad_weight,<state 1>,...'");
    }
    std::vector<double> states;
    for (std::size_t c = 2; c < t.header.size(); ++c) states.push_back(parse_double(t.header[c], source + " state header"));
    CellReader reader(source);
    std::vector<double> signals, weights, densities;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        signals.push_back(reader.number(t.rows[r][0], t.lines[r], "signal"));
        weights.push_back(reader.number(t.rows[r][1], t.lines[r], "quad_weight"));
        for (std::size_t c = 2; c < t.header.size(); ++c) densities.push_back(reader.number(t.rows[r][c], t.lines[r], t.header[c]));
    }
    reader.finish();
    return SignalFamily(std::move(signals), make_grid(std::move(states)), std::move(densities), std::move(weights));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write '" + path + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(ErrorCode::Io, "failed writing '" + path + "'");
}

}  // namespace ipe

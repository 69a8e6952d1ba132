#include "countercast/artifacts.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "countercast/csv.hpp"
#include "countercast/errors.hpp"

namespace ccast {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw DataError("cannot write file: " + path);
    return out;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw DataError("cannot read file: " + path);
    return in;
}

double parse_or_nan(const std::string& s) {
    if (s.empty() || s == "nan" || s == "-nan") return kNaN;
    return std::stod(s);
}

}  // namespace

void write_panel_csv(const std::string& path, const PanelDataset& panel) {
    auto out = open_out(path);
    out << "firm_id,period,sales,cogs,xsga,ppegt,emp,naics2,wage_bill\n";
    for (const auto& firm : panel.firms) {
        for (const auto& o : firm.observations) {
            out << o.firm_id << ',' << o.period.str() << ',' << format_number(o.sales) << ','
                << format_number(o.cogs) << ',' << format_number(o.xsga) << ','
                << format_number(o.ppegt) << ',' << format_number(o.employment) << ','
                << o.naics2 << ',' << (o.wage_bill ? format_number(*o.wage_bill) : "") << '\n';
        }
    }
}

void write_forecasts_csv(const std::string& path, const FleetSummary& summary,
                         const std::string& estimator) {
    auto out = open_out(path);
    out << "firm_id,estimator,weight,period,horizon,observed,point,lo50,hi50,lo80,hi80,lo90,hi90,"
           "lo95,hi95,var_obs,var_trend,var_seasonal,alpha_mean,alpha_lo95,alpha_hi95,chosen_lag,"
           "flags\n";
    for (const auto& r : summary.results) {
        if (!r.fitted) continue;
        for (std::size_t h = 0; h < r.horizon_periods.size(); ++h) {
            const bool bands = h < r.forecast.interval.size();
            const IntervalSet iv = bands ? r.forecast.interval[h] : IntervalSet{};
            out << r.firm_id << ',' << estimator << ',' << format_number(r.weight) << ','
                << r.horizon_periods[h].str() << ',' << (h + 1) << ','
                << format_number(r.observed[h]) << ',' << format_number(r.forecast.point[h]);
            if (bands)
                out << ',' << format_number(iv.lo50) << ',' << format_number(iv.hi50) << ','
                    << format_number(iv.lo80) << ',' << format_number(iv.hi80) << ','
                    << format_number(iv.lo90) << ',' << format_number(iv.hi90) << ','
                    << format_number(iv.lo95) << ',' << format_number(iv.hi95);
            else
                out << ",nan,nan,nan,nan,nan,nan,nan,nan";
            out << ',' << format_number(r.var_obs) << ',' << format_number(r.var_trend) << ','
                << format_number(r.var_seasonal) << ',' << format_number(r.alpha_mean) << ',';
            if (r.alpha_interval95)
                out << format_number(r.alpha_interval95->first) << ','
                    << format_number(r.alpha_interval95->second);
            else
                out << "nan,nan";
            out << ',' << r.chosen_lag << ',' << r.flags << '\n';
        }
    }
}

std::vector<FirmFitResult> read_forecasts_csv(const std::string& path) {
    auto in = open_in(path);
    CsvReader reader(in);
    const auto c_firm = reader.require("firm_id");
    const auto c_weight = reader.require("weight");
    const auto c_period = reader.require("period");
    const auto c_observed = reader.require("observed");
    const auto c_point = reader.require("point");
    const auto c_lo50 = reader.require("lo50");
    const auto c_var_obs = reader.require("var_obs");
    const auto c_var_trend = reader.require("var_trend");
    const auto c_var_seasonal = reader.require("var_seasonal");
    const auto c_alpha_mean = reader.require("alpha_mean");
    const auto c_alpha_lo = reader.require("alpha_lo95");
    const auto c_alpha_hi = reader.require("alpha_hi95");
    const auto c_lag = reader.require("chosen_lag");
    const auto c_flags = reader.require("flags");

    std::vector<FirmFitResult> out;
    std::vector<std::string> row;
    while (reader.next(row)) {
        const std::string& firm = row.at(c_firm);
        if (out.empty() || out.back().firm_id != firm) {
            FirmFitResult r;
            r.firm_id = firm;
            r.fitted = true;
            r.weight = std::stod(row.at(c_weight));
            r.var_obs = parse_or_nan(row.at(c_var_obs));
            r.var_trend = parse_or_nan(row.at(c_var_trend));
            r.var_seasonal = parse_or_nan(row.at(c_var_seasonal));
            r.alpha_mean = parse_or_nan(row.at(c_alpha_mean));
            const double alo = parse_or_nan(row.at(c_alpha_lo));
            const double ahi = parse_or_nan(row.at(c_alpha_hi));
            if (!std::isnan(alo) && !std::isnan(ahi)) r.alpha_interval95 = {alo, ahi};
            r.chosen_lag = std::stoi(row.at(c_lag));
            r.flags = row.at(c_flags);
            out.push_back(std::move(r));
        }
        auto& r = out.back();
        r.horizon_periods.push_back(Period::parse(row.at(c_period)));
        r.observed.push_back(parse_or_nan(row.at(c_observed)));
        r.forecast.point.push_back(std::stod(row.at(c_point)));
        if (!std::isnan(parse_or_nan(row.at(c_lo50)))) {
            IntervalSet iv;
            iv.lo50 = std::stod(row.at(c_lo50));
            iv.hi50 = std::stod(row.at(c_lo50 + 1));
            iv.lo80 = std::stod(row.at(c_lo50 + 2));
            iv.hi80 = std::stod(row.at(c_lo50 + 3));
            iv.lo90 = std::stod(row.at(c_lo50 + 4));
            iv.hi90 = std::stod(row.at(c_lo50 + 5));
            iv.lo95 = std::stod(row.at(c_lo50 + 6));
            iv.hi95 = std::stod(row.at(c_lo50 + 7));
            r.forecast.interval.push_back(iv);
        }
    }
    return out;
}

void write_skips_csv(const std::string& path, const FleetSummary& summary) {
    auto out = open_out(path);
    out << "firm_id,reason\n";
    for (const auto& r : summary.results)
        if (!r.fitted) out << r.firm_id << ',' << r.skip_reason << '\n';
}

void write_coverage_csv(const std::string& path, const FleetSummary& summary) {
    auto out = open_out(path);
    out << "firm_id,period,observed,lo95,hi95\n";
    for (const auto& r : summary.results) {
        if (!r.fitted || r.band_lo95.empty()) continue;
        for (std::size_t t = 0; t < r.pre_periods.size(); ++t)
            out << r.firm_id << ',' << r.pre_periods[t].str() << ','
                << format_number(r.pre_observed[t]) << ',' << format_number(r.band_lo95[t]) << ','
                << format_number(r.band_hi95[t]) << '\n';
    }
}

std::vector<CoverageRow> read_coverage_csv(const std::string& path) {
    auto in = open_in(path);
    CsvReader reader(in);
    const auto c_firm = reader.require("firm_id");
    const auto c_period = reader.require("period");
    const auto c_obs = reader.require("observed");
    const auto c_lo = reader.require("lo95");
    const auto c_hi = reader.require("hi95");
    std::vector<CoverageRow> out;
    std::vector<std::string> row;
    while (reader.next(row)) {
        CoverageRow r;
        r.firm_id = row.at(c_firm);
        r.period = Period::parse(row.at(c_period));
        r.observed = std::stod(row.at(c_obs));
        r.lo95 = std::stod(row.at(c_lo));
        r.hi95 = std::stod(row.at(c_hi));
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

void write_sidecar_record(std::ofstream& out, const std::string& firm_id,
                          const Eigen::MatrixXd& m, const std::string& extra) {
    out << "firm " << firm_id << " rows " << m.rows() << " cols " << m.cols()
        << " dtype f64le order row-major" << extra << '\n';
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            out.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
}

}  // namespace

void write_draws_sidecar(const std::string& path, const FleetSummary& summary) {
    auto out = open_out(path, true);
    out << "countercast draws v1\n";
    for (const auto& r : summary.results) {
        if (!r.fitted || r.predictive.size() == 0) continue;
        write_sidecar_record(out, r.firm_id, r.predictive, "");
    }
    out << "end\n";
}

void write_audit_sidecar(const std::string& path, const FleetSummary& summary) {
    auto out = open_out(path, true);
    out << "countercast draws v1\n";
    for (const auto& r : summary.results) {
        if (!r.fitted || r.audit_draws.size() == 0) continue;
        std::string columns = " columns ";
        for (std::size_t c = 0; c < r.audit_columns.size(); ++c)
            columns += (c ? "," : "") + r.audit_columns[c];
        write_sidecar_record(out, r.firm_id, r.audit_draws, columns);
    }
    out << "end\n";
}

std::map<std::string, Eigen::MatrixXd> read_draws_sidecar(const std::string& path) {
    auto in = open_in(path, true);
    std::string line;
    if (!std::getline(in, line) || line != "countercast draws v1")
        throw DataError("bad draws sidecar header in " + path);
    std::map<std::string, Eigen::MatrixXd> out;
    while (std::getline(in, line)) {
        if (line == "end") return out;
        std::istringstream header(line);
        std::string word, firm_id, rows_kw, cols_kw;
        long rows = 0, cols = 0;
        header >> word >> firm_id >> rows_kw >> rows >> cols_kw >> cols;
        if (word != "firm" || rows_kw != "rows" || cols_kw != "cols" || rows <= 0 || cols <= 0)
            throw DataError("bad draws sidecar record: " + line);
        Eigen::MatrixXd m(rows, cols);
        for (long i = 0; i < rows; ++i)
            for (long j = 0; j < cols; ++j) {
                double v = 0.0;
                in.read(reinterpret_cast<char*>(&v), sizeof(double));
                m(i, j) = v;
            }
        if (!in) throw DataError("truncated draws sidecar: " + path);
        out[firm_id] = std::move(m);
    }
    throw DataError("draws sidecar missing end marker: " + path);
}

void write_truth_csv(const std::string& path, const SyntheticPanel& synthetic) {
    auto out = open_out(path);
    out << "firm_id,period,markup_observed,profit_observed,markup_counterfactual,"
           "profit_counterfactual,markup_effect,profit_effect\n";
    for (const auto& t : synthetic.truth) {
        std::size_t treated = 0;
        for (std::size_t i = 0; i < t.periods.size(); ++i) {
            const bool is_treated = t.periods[i] >= synthetic.treatment_start;
            out << t.firm_id << ',' << t.periods[i].str() << ','
                << format_number(t.markup_observed[i]) << ','
                << format_number(t.profit_observed[i]) << ',';
            if (is_treated) {
                out << format_number(t.markup_counterfactual[treated]) << ','
                    << format_number(t.profit_counterfactual[treated]) << ','
                    << format_number(t.markup_effect[treated]) << ','
                    << format_number(t.profit_effect[treated]);
                ++treated;
            } else {
                out << ",,,";
            }
            out << '\n';
        }
    }
}

void write_elasticity_csv(const std::string& path, double default_theta) {
    auto out = open_out(path);
    out << "naics2,period,theta\n";
    out << "*,*," << format_number(default_theta) << '\n';
}

void write_deflator_csv(const std::string& path, const std::vector<Period>& periods,
                        double index_value, int base_year) {
    auto out = open_out(path);
    out << "period,index\n";
    bool base_present = false;
    for (const auto& p : periods) {
        out << p.str() << ',' << format_number(index_value) << '\n';
        if (p.year == base_year) base_present = true;
    }
    if (!base_present) {
        // base row keeps factor() well defined even off the panel range
        const Period base = periods.empty() || !periods.front().is_quarterly()
                                ? Period{base_year, 0}
                                : Period{base_year, 1};
        out << base.str() << ',' << format_number(index_value) << '\n';
    }
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

void require_artifact(const std::string& path, const std::string& producing_command) {
    if (!file_exists(path))
        throw DataError("missing artifact " + path + "; run `countercast " + producing_command +
                        "` first");
}

}  // namespace ccast

#include "gwkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gwkit/errors.hpp"

using namespace arma;

namespace gwkit {

const char* transform_name(TransformKind kind) {
    switch (kind) {
        case TransformKind::None: return "none";
        case TransformKind::NaturalLog: return "log";
        case TransformKind::Sqrt: return "sqrt";
        case TransformKind::Center: return "center";
        case TransformKind::Standardize: return "standardize";
    }
    return "none";
}

TransformKind transform_from_name(const std::string& name) {
    if (name == "none") return TransformKind::None;
    if (name == "natural_log" || name == "log") return TransformKind::NaturalLog;
    if (name == "sqrt") return TransformKind::Sqrt;
    if (name == "center") return TransformKind::Center;
    if (name == "standardize") return TransformKind::Standardize;
    throw ContractError("unknown transform '" + name + "'");
}

SpatialDataset::SpatialDataset(mat coords, vec response, mat predictors,
                               std::string response_name,
                               std::vector<std::string> predictor_names)
    : coords_(std::move(coords)),
      response_(std::move(response)),
      predictors_(std::move(predictors)),
      response_name_(std::move(response_name)),
      predictor_names_(std::move(predictor_names)) {
    if (coords_.n_cols != 2) throw ContractError("coordinates must have two columns");
    if (response_.n_elem != coords_.n_rows || predictors_.n_rows != coords_.n_rows)
        throw ContractError("row counts of coordinates, response and predictors differ");
    if (predictor_names_.size() != predictors_.n_cols)
        throw ContractError("predictor name count does not match predictor columns");
}

bool SpatialDataset::has_column(const std::string& name) const {
    if (name == response_name_) return true;
    return std::find(predictor_names_.begin(), predictor_names_.end(), name) !=
           predictor_names_.end();
}

vec SpatialDataset::column(const std::string& name) const {
    if (name == response_name_) return response_;
    return predictors_.col(predictor_index(name));
}

std::size_t SpatialDataset::predictor_index(const std::string& name) const {
    auto it = std::find(predictor_names_.begin(), predictor_names_.end(), name);
    if (it == predictor_names_.end())
        throw SchemaError("no predictor column named '" + name + "'");
    return static_cast<std::size_t>(it - predictor_names_.begin());
}

void SpatialDataset::apply_transform(const std::string& variable, TransformKind kind) {
    if (kind == TransformKind::Center || kind == TransformKind::Standardize)
        throw ContractError("use center() for centring operations");
    vec values = column(variable);
    if (kind == TransformKind::NaturalLog || kind == TransformKind::Sqrt) {
        std::vector<std::size_t> bad;
        for (uword i = 0; i < values.n_elem; ++i) {
            double v = values(i);
            bool ok = kind == TransformKind::NaturalLog ? v > 0.0 : v >= 0.0;
            if (!ok) bad.push_back(static_cast<std::size_t>(i) + 1);  // 1-based, as users count
        }
        if (!bad.empty()) {
            std::ostringstream msg;
            msg << transform_name(kind) << " undefined for '" << variable << "' at data row";
            if (bad.size() > 1) msg << "s";
            std::size_t shown = std::min<std::size_t>(bad.size(), 10);
            for (std::size_t i = 0; i < shown; ++i) msg << " " << bad[i];
            if (bad.size() > shown) msg << " (+" << bad.size() - shown << " more)";
            throw TransformError(msg.str());
        }
        if (kind == TransformKind::NaturalLog) {
            values = log(values);
        } else {
            values = sqrt(values);
        }
    }
    if (variable == response_name_) {
        response_ = values;
    } else {
        predictors_.col(predictor_index(variable)) = values;
    }
    transform_log_.push_back({variable, kind});
}

ScalingRecord SpatialDataset::center(const std::vector<std::string>& variables,
                                     bool standardize) {
    ScalingRecord record;
    record.variables = variables;
    record.standardized = standardize;
    record.means.set_size(variables.size());
    record.sds.ones(variables.size());
    for (std::size_t k = 0; k < variables.size(); ++k) {
        vec values = column(variables[k]);
        double mu = mean(values);
        double sd = 1.0;
        if (standardize) {
            sd = stddev(values);
            if (sd == 0.0)
                throw DegenerateInputError("cannot standardize constant variable '" +
                                           variables[k] + "'");
        }
        values = (values - mu) / sd;
        if (variables[k] == response_name_) {
            response_ = values;
        } else {
            predictors_.col(predictor_index(variables[k])) = values;
        }
        record.means(k) = mu;
        record.sds(k) = sd;
        transform_log_.push_back({variables[k],
                                  standardize ? TransformKind::Standardize
                                              : TransformKind::Center,
                                  mu, sd});
    }
    return record;
}

void SpatialDataset::uncenter(const ScalingRecord& record) {
    for (std::size_t k = 0; k < record.variables.size(); ++k) {
        vec values = column(record.variables[k]);
        values = values * record.sds(k) + record.means(k);
        if (record.variables[k] == response_name_) {
            response_ = values;
        } else {
            predictors_.col(predictor_index(record.variables[k])) = values;
        }
        // Undo the log entry too, so a replay of the log still reproduces the
        // working data exactly.
        auto kind = record.standardized ? TransformKind::Standardize : TransformKind::Center;
        for (auto it = transform_log_.rbegin(); it != transform_log_.rend(); ++it) {
            if (it->variable == record.variables[k] && it->kind == kind) {
                transform_log_.erase(std::next(it).base());
                break;
            }
        }
    }
}

void SpatialDataset::replay(const std::vector<TransformRecord>& log) {
    for (const auto& rec : log) {
        switch (rec.kind) {
            case TransformKind::None:
            case TransformKind::NaturalLog:
            case TransformKind::Sqrt:
                apply_transform(rec.variable, rec.kind);
                break;
            case TransformKind::Center:
            case TransformKind::Standardize: {
                // Replay uses the recorded moments, not recomputed ones, so a
                // replay on identical raw data is bit-for-bit identical.
                vec values = column(rec.variable);
                values = (values - rec.mean) / rec.sd;
                if (rec.variable == response_name_) {
                    response_ = values;
                } else {
                    predictors_.col(predictor_index(rec.variable)) = values;
                }
                transform_log_.push_back(rec);
                break;
            }
        }
    }
}

SpatialDataset SpatialDataset::permuted(const uvec& order) const {
    if (order.n_elem != n()) throw ContractError("permutation length differs from n");
    SpatialDataset out = *this;
    out.coords_ = coords_.rows(order);
    out.response_ = response_(order);
    out.predictors_ = predictors_.rows(order);
    return out;
}

// --- distances ---------------------------------------------------------------

namespace {
constexpr std::size_t kMaterializeLimit = 20000;
}

DistanceMatrix::DistanceMatrix(const mat& coords) : coords_(coords), n_(coords.n_rows) {
    if (coords.n_cols != 2) throw ContractError("coordinates must have two columns");
    if (n_ == 0) throw ContractError("empty coordinate set");
    materialized_ = n_ <= kMaterializeLimit;
    if (materialized_) dense_.set_size(n_, n_);

    double max_d = 0.0;
    double min_pos = datum::inf;
    for (uword i = 0; i < n_; ++i) {
        vec d = computed_row(i);
        if (materialized_) dense_.col(i) = d;
        for (uword j = i + 1; j < n_; ++j) {
            double dij = d(j);
            if (dij > max_d) max_d = dij;
            if (dij > 0.0 && dij < min_pos) min_pos = dij;
            if (dij == 0.0)
                coincident_pairs_.emplace_back(static_cast<std::size_t>(i),
                                               static_cast<std::size_t>(j));
        }
    }
    max_pair_distance_ = max_d;
    min_positive_distance_ = std::isfinite(min_pos) ? min_pos : 0.0;
}

vec DistanceMatrix::computed_row(std::size_t i) const {
    vec du = coords_.col(0) - coords_(i, 0);
    vec dv = coords_.col(1) - coords_(i, 1);
    return sqrt(du % du + dv % dv);
}

vec DistanceMatrix::row(std::size_t i) const {
    if (i >= n_) throw ContractError("distance row index out of range");
    if (materialized_) return dense_.col(i);
    return computed_row(i);
}

double DistanceMatrix::at(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_) throw ContractError("distance index out of range");
    if (materialized_) return dense_(j, i);
    double du = coords_(i, 0) - coords_(j, 0);
    double dv = coords_(i, 1) - coords_(j, 1);
    return std::sqrt(du * du + dv * dv);
}

double DistanceMatrix::kth_nearest_distance(std::size_t i, std::size_t k) const {
    vec d = row(i);
    uword kk = std::clamp<uword>(static_cast<uword>(k), 1, n_);
    vec sorted = sort(d);
    return sorted(kk - 1);
}

// --- csv ---------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

std::string trimmed(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& raw, std::size_t row, const std::string& column) {
    std::string s = trimmed(raw);
    if (!s.empty()) {
        try {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used == s.size()) return v;
        } catch (const std::exception&) {
        }
    }
    std::ostringstream msg;
    msg << "row " << row << ", column '" << column << "': cannot parse '" << raw
        << "' as a number";
    throw ParseError(msg.str());
}

} // namespace

SpatialDataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    if (schema.response.empty()) throw SchemaError("schema has no response column");

    std::string header_line;
    if (!std::getline(in, header_line)) throw SchemaError("'" + path + "' is empty");
    std::vector<std::string> header = split_csv_line(header_line);
    for (auto& h : header) h = trimmed(h);

    auto column_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw SchemaError("'" + path + "' has no column named '" + name + "'");
        if (std::find(it + 1, header.end(), name) != header.end())
            throw SchemaError("'" + path + "' names column '" + name +
                              "' more than once; the mapping is ambiguous");
        return static_cast<std::size_t>(it - header.begin());
    };

    std::size_t xi = column_of(schema.x);
    std::size_t yi = column_of(schema.y);
    std::size_t ri = column_of(schema.response);
    std::vector<std::size_t> pi;
    for (const auto& p : schema.predictors) pi.push_back(column_of(p));

    std::vector<double> xs, ys, rs;
    std::vector<std::vector<double>> ps(pi.size());
    std::string line;
    std::size_t row = 1;  // header was row 1
    while (std::getline(in, line)) {
        ++row;
        if (trimmed(line).empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            std::ostringstream msg;
            msg << "row " << row << ": expected " << header.size() << " fields, found "
                << fields.size();
            throw ParseError(msg.str());
        }
        xs.push_back(parse_number(fields[xi], row, schema.x));
        ys.push_back(parse_number(fields[yi], row, schema.y));
        rs.push_back(parse_number(fields[ri], row, schema.response));
        for (std::size_t k = 0; k < pi.size(); ++k)
            ps[k].push_back(parse_number(fields[pi[k]], row, schema.predictors[k]));
    }

    std::size_t n = xs.size();
    if (n < schema.predictors.size() + 2) {
        std::ostringstream msg;
        msg << "'" << path << "' has " << n << " data rows, need at least "
            << schema.predictors.size() + 2 << " for " << schema.predictors.size()
            << " predictors";
        throw InsufficientDataError(msg.str());
    }

    mat coords(n, 2);
    vec response(n);
    mat predictors(n, pi.size());
    for (std::size_t i = 0; i < n; ++i) {
        coords(i, 0) = xs[i];
        coords(i, 1) = ys[i];
        response(i) = rs[i];
        for (std::size_t k = 0; k < pi.size(); ++k) predictors(i, k) = ps[k][i];
    }
    return SpatialDataset(std::move(coords), std::move(response), std::move(predictors),
                          schema.response, schema.predictors);
}

} // namespace gwkit

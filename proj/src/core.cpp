#include "dpmcpm/core.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace dpmcpm
{

//----------------------------------------------------------------------------
// CategoricalSchema

CategoricalSchema::CategoricalSchema(std::vector<std::size_t> cardinalities)
    : cardinalities_(std::move(cardinalities))
{
    if (cardinalities_.empty()) {
        throw ValidationError("schema needs at least one variable");
    }
    augmented_offsets_.reserve(cardinalities_.size() + 1);
    collapsed_offsets_.reserve(cardinalities_.size() + 1);
    std::size_t aug = 0;
    std::size_t col = 0;
    for (std::size_t j = 0; j < cardinalities_.size(); ++j) {
        if (cardinalities_[j] < 2) {
            throw ValidationError("variable " + std::to_string(j + 1) +
                                  " has fewer than 2 categories");
        }
        if (cardinalities_[j] >= std::numeric_limits<Code>::max()) {
            throw ValidationError("variable " + std::to_string(j + 1) +
                                  " has too many categories");
        }
        augmented_offsets_.push_back(aug);
        collapsed_offsets_.push_back(col);
        aug += cardinalities_[j] + 1;
        col += cardinalities_[j];
    }
    augmented_offsets_.push_back(aug);
    collapsed_offsets_.push_back(col);
}

std::size_t CategoricalSchema::augmented_cells() const
{
    return augmented_offsets_.empty() ? 0 : augmented_offsets_.back();
}

std::size_t CategoricalSchema::collapsed_cells() const
{
    return collapsed_offsets_.empty() ? 0 : collapsed_offsets_.back();
}

bool CategoricalSchema::all_binary() const
{
    return std::all_of(cardinalities_.begin(), cardinalities_.end(),
                       [](std::size_t d) { return d == 2; });
}

//----------------------------------------------------------------------------
// Dataset

Dataset::Dataset(CategoricalSchema schema, std::size_t rows, std::vector<Code> cells,
                 std::vector<std::string> names)
    : schema_(std::move(schema)), rows_(rows), cells_(std::move(cells)), names_(std::move(names))
{
    const std::size_t p = schema_.variables();
    if (p == 0) {
        throw ValidationError("dataset schema is empty");
    }
    if (rows_ == 0) {
        throw ValidationError("dataset has no rows");
    }
    if (cells_.size() != rows_ * p) {
        throw ValidationError("dataset cell count does not match rows x columns");
    }
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            if (cells_[i * p + j] > schema_.cardinality(j)) {
                throw ValidationError("row " + std::to_string(i + 1) + ", column " +
                                      std::to_string(j + 1) + ": code exceeds d_j");
            }
        }
    }
    if (names_.empty()) {
        for (std::size_t j = 0; j < p; ++j) {
            names_.push_back("V" + std::to_string(j + 1));
        }
    } else if (names_.size() != p) {
        throw ValidationError("dataset column names do not match schema");
    }
}

std::size_t Dataset::missing_count() const
{
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), kMissing));
}

Dataset Dataset::with_cells(std::vector<Code> cells) const
{
    return Dataset(schema_, rows_, std::move(cells), names_);
}

//----------------------------------------------------------------------------
// Priors

Priors Priors::flat(const CategoricalSchema& schema, double alpha, double beta)
{
    Priors priors;
    priors.alpha = alpha;
    for (std::size_t j = 0; j < schema.variables(); ++j) {
        priors.beta.emplace_back(schema.cardinality(j) + 1, beta);
    }
    priors.validate(schema);
    return priors;
}

void Priors::validate(const CategoricalSchema& schema) const
{
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw ValidationError("alpha must be positive");
    }
    if (beta.size() != schema.variables()) {
        throw ValidationError("beta must have one vector per variable");
    }
    for (std::size_t j = 0; j < beta.size(); ++j) {
        if (beta[j].size() != schema.cardinality(j) + 1) {
            throw ValidationError("beta for variable " + std::to_string(j + 1) +
                                  " must have d_j + 1 entries");
        }
        for (double b : beta[j]) {
            if (!(b > 0.0) || !std::isfinite(b)) {
                throw ValidationError("beta entries must be positive");
            }
        }
    }
}

//----------------------------------------------------------------------------
// CollapsedModel

namespace
{

void check_simplex(std::span<const double> v, double tol, const std::string& what)
{
    double sum = 0.0;
    for (double x : v) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw ValidationError(what + " has a negative or non-finite entry");
        }
        sum += x;
    }
    if (std::abs(sum - 1.0) > tol) {
        std::ostringstream msg;
        msg.precision(17);
        msg << what << " sums to " << sum << ", not 1";
        throw ValidationError(msg.str());
    }
}

} // namespace

void CollapsedModel::validate(double tol) const
{
    if (theta.empty()) {
        throw ValidationError("model has no components");
    }
    if (tilde_psi.size() != theta.size() * schema.collapsed_cells()) {
        throw ValidationError("tilde_psi size does not match k and cardinalities");
    }
    check_simplex(theta, tol, "theta");
    for (std::size_t h = 0; h < components(); ++h) {
        for (std::size_t j = 0; j < schema.variables(); ++j) {
            check_simplex(psi(h, j), tol,
                          "tilde_psi[" + std::to_string(h + 1) + "][" + std::to_string(j + 1) + "]");
        }
    }
}

//----------------------------------------------------------------------------
// Joint tables

std::size_t table_size(const CategoricalSchema& schema)
{
    std::size_t size = 1;
    for (std::size_t d : schema.cardinalities()) {
        if (size > std::numeric_limits<std::size_t>::max() / d) {
            return std::numeric_limits<std::size_t>::max();
        }
        size *= d;
    }
    return size;
}

std::size_t JointDistribution::index(std::span<const Code> combo) const
{
    std::size_t idx = 0;
    for (std::size_t j = 0; j < schema.variables(); ++j) {
        idx = idx * schema.cardinality(j) + (combo[j] - 1);
    }
    return idx;
}

std::vector<Code> JointDistribution::combination(std::size_t index) const
{
    std::vector<Code> combo(schema.variables());
    for (std::size_t j = schema.variables(); j-- > 0;) {
        const std::size_t d = schema.cardinality(j);
        combo[j] = static_cast<Code>(index % d + 1);
        index /= d;
    }
    return combo;
}

void JointDistribution::validate(double tol) const
{
    if (table.size() != table_size(schema)) {
        throw ValidationError("joint table size does not match schema");
    }
    check_simplex(table, tol, "joint table");
}

void MissingnessTable::validate() const
{
    const std::size_t cells = table_size(schema);
    if (q.size() != schema.variables()) {
        throw ValidationError("missingness table needs one block per variable");
    }
    for (const auto& block : q) {
        if (block.size() != cells) {
            throw ValidationError("missingness block size does not match schema");
        }
        for (double v : block) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("missing rates must lie in [0, 1]");
            }
        }
    }
}

//----------------------------------------------------------------------------
// CSV

namespace
{

std::string trim(std::string_view s)
{
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

bool is_na(const std::string& s)
{
    return s.size() == 2 && std::toupper(static_cast<unsigned char>(s[0])) == 'N' &&
           std::toupper(static_cast<unsigned char>(s[1])) == 'A';
}

std::string where(std::size_t row, std::size_t col, const std::string& name)
{
    return "row " + std::to_string(row) + ", column " + std::to_string(col) + " (" + name + ")";
}

} // namespace

Dataset parse_dataset(const std::string& text, const CategoricalSchema* schema)
{
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> names;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!trim(line).empty()) {
            names = split_line(line);
            break;
        }
    }
    if (names.empty()) {
        throw ParseError("CSV has no header row");
    }
    const std::size_t p = names.size();
    if (schema != nullptr && schema->variables() != p) {
        throw ParseError("CSV has " + std::to_string(p) + " columns but schema declares " +
                         std::to_string(schema->variables()));
    }

    std::vector<Code> cells;
    std::vector<std::size_t> maxima(p, 0);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty()) {
            continue;
        }
        ++rows;
        const auto fields = split_line(line);
        if (fields.size() != p) {
            throw ParseError("row " + std::to_string(rows) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(p));
        }
        for (std::size_t j = 0; j < p; ++j) {
            const std::string& f = fields[j];
            if (is_na(f)) {
                cells.push_back(kMissing);
                continue;
            }
            if (f.empty() || !std::all_of(f.begin(), f.end(), [](unsigned char c) {
                    return std::isdigit(c) != 0;
                })) {
                throw ParseError(where(rows, j + 1, names[j]) + ": '" + f + "' is not a positive integer");
            }
            unsigned long v = 0;
            try {
                v = std::stoul(f);
            } catch (const std::exception&) {
                throw ParseError(where(rows, j + 1, names[j]) + ": '" + f + "' is out of range");
            }
            if (v == 0 || v >= std::numeric_limits<Code>::max()) {
                throw ParseError(where(rows, j + 1, names[j]) + ": code " + f + " out of range");
            }
            if (schema != nullptr && v > schema->cardinality(j)) {
                throw ParseError(where(rows, j + 1, names[j]) + ": code " + f + " exceeds d = " +
                                 std::to_string(schema->cardinality(j)));
            }
            maxima[j] = std::max<std::size_t>(maxima[j], v);
            cells.push_back(static_cast<Code>(v));
        }
    }
    if (rows == 0) {
        throw ParseError("CSV has no data rows");
    }

    if (schema != nullptr) {
        return Dataset(*schema, rows, std::move(cells), std::move(names));
    }
    for (std::size_t j = 0; j < p; ++j) {
        if (maxima[j] < 2) {
            throw ParseError("column " + names[j] + ": inferred d = " + std::to_string(maxima[j]) +
                             " < 2");
        }
    }
    return Dataset(CategoricalSchema(std::move(maxima)), rows, std::move(cells), std::move(names));
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Dataset read_dataset(const std::string& path, const CategoricalSchema* schema)
{
    return parse_dataset(read_file(path), schema);
}

std::string format_dataset(const Dataset& data)
{
    std::string out;
    out.reserve(data.rows() * data.cols() * 3 + 64);
    for (std::size_t j = 0; j < data.cols(); ++j) {
        if (j > 0) {
            out += ',';
        }
        out += data.names()[j];
    }
    out += '\n';
    for (std::size_t i = 0; i < data.rows(); ++i) {
        for (std::size_t j = 0; j < data.cols(); ++j) {
            if (j > 0) {
                out += ',';
            }
            const Code c = data.at(i, j);
            out += c == kMissing ? std::string("NA") : std::to_string(c);
        }
        out += '\n';
    }
    return out;
}

void write_file_atomic(const std::string& path, const std::string& contents)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write " + tmp.string());
        }
        out << contents;
        out.flush();
        if (!out) {
            throw Error("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot rename into " + path);
    }
}

} // namespace dpmcpm

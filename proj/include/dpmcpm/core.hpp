#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpmcpm
{

//----------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
// A caller broke an operation's precondition (schema mismatch, wrong variable).
struct ContractError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct SizeError : Error { using Error::Error; };

//----------------------------------------------------------------------------
// Schema and data

// Category code. 0 is the missing cell, observed values are 1..d_j.
using Code = std::uint16_t;
inline constexpr Code kMissing = 0;

class CategoricalSchema
{
public:
    CategoricalSchema() = default;
    explicit CategoricalSchema(std::vector<std::size_t> cardinalities);

    std::size_t variables() const { return cardinalities_.size(); }
    std::size_t cardinality(std::size_t j) const { return cardinalities_[j]; }
    const std::vector<std::size_t>& cardinalities() const { return cardinalities_; }

    // Cells per variable including the missingness cell: d_j + 1.
    std::size_t augmented_cells() const;
    // Offset of variable j's block in a flat augmented (d_j + 1 per variable) layout.
    std::size_t augmented_offset(std::size_t j) const { return augmented_offsets_[j]; }
    // Same, for the collapsed layout with d_j cells per variable.
    std::size_t collapsed_cells() const;
    std::size_t collapsed_offset(std::size_t j) const { return collapsed_offsets_[j]; }

    bool all_binary() const;

    friend bool operator==(const CategoricalSchema& a, const CategoricalSchema& b)
    {
        return a.cardinalities_ == b.cardinalities_;
    }

private:
    std::vector<std::size_t> cardinalities_;
    std::vector<std::size_t> augmented_offsets_;
    std::vector<std::size_t> collapsed_offsets_;
};

// n x p integer matrix, row-major. Immutable once built.
class Dataset
{
public:
    Dataset() = default;
    Dataset(CategoricalSchema schema, std::size_t rows, std::vector<Code> cells,
            std::vector<std::string> names = {});

    const CategoricalSchema& schema() const { return schema_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return schema_.variables(); }
    const std::vector<std::string>& names() const { return names_; }

    Code at(std::size_t i, std::size_t j) const { return cells_[i * cols() + j]; }
    bool observed(std::size_t i, std::size_t j) const { return at(i, j) != kMissing; }
    std::span<const Code> row(std::size_t i) const
    {
        return {cells_.data() + i * cols(), cols()};
    }
    const std::vector<Code>& cells() const { return cells_; }

    std::size_t missing_count() const;
    bool complete() const { return missing_count() == 0; }

    // Copy with a replaced cell matrix; same schema and names.
    Dataset with_cells(std::vector<Code> cells) const;

    friend bool operator==(const Dataset& a, const Dataset& b)
    {
        return a.schema_ == b.schema_ && a.rows_ == b.rows_ && a.cells_ == b.cells_;
    }

private:
    CategoricalSchema schema_;
    std::size_t rows_ = 0;
    std::vector<Code> cells_;
    std::vector<std::string> names_;
};

//----------------------------------------------------------------------------
// Priors

struct Priors
{
    double alpha = 0.25;
    // beta[j] has d_j + 1 entries: the missingness cell first, then categories 1..d_j.
    std::vector<std::vector<double>> beta;

    // alpha = 0.25, all beta = 1.
    static Priors flat(const CategoricalSchema& schema, double alpha = 0.25, double beta = 1.0);

    void validate(const CategoricalSchema& schema) const;
};

//----------------------------------------------------------------------------
// Fitted parameters

// Mixture of product-multinomials over observed categories only.
// tilde_psi is component-major: component h, variable j, category c (1-based)
// lives at h * collapsed_cells + collapsed_offset(j) + c - 1.
struct CollapsedModel
{
    CategoricalSchema schema;
    std::vector<double> theta;
    std::vector<double> tilde_psi;

    std::size_t components() const { return theta.size(); }

    std::span<const double> psi(std::size_t h, std::size_t j) const
    {
        return {tilde_psi.data() + h * schema.collapsed_cells() + schema.collapsed_offset(j),
                schema.cardinality(j)};
    }
    std::span<double> psi(std::size_t h, std::size_t j)
    {
        return {tilde_psi.data() + h * schema.collapsed_cells() + schema.collapsed_offset(j),
                schema.cardinality(j)};
    }

    // Throws ValidationError when a vector is off the simplex by more than tol.
    void validate(double tol = 1e-10) const;
};

// Default ceiling on dense joint tables.
inline constexpr std::size_t kDefaultCellLimit = 10'000'000;

// Product of cardinalities, or SIZE_MAX on overflow.
std::size_t table_size(const CategoricalSchema& schema);

// Dense table over category combinations, first variable slowest.
struct JointDistribution
{
    CategoricalSchema schema;
    std::vector<double> table;

    // Flat index of a 1-based combination.
    std::size_t index(std::span<const Code> combo) const;
    // Inverse of index(), 1-based codes.
    std::vector<Code> combination(std::size_t index) const;

    void validate(double tol = 1e-9) const;
};

// q[j][cell]: probability that variable j is missing given the full combination.
struct MissingnessTable
{
    CategoricalSchema schema;
    std::vector<std::vector<double>> q;

    void validate() const;
};

//----------------------------------------------------------------------------
// CSV datasets

// Reads a header-plus-rows CSV. "NA" (any case) is missing. Without a schema,
// d_j is the column maximum and must be at least 2.
Dataset parse_dataset(const std::string& text, const CategoricalSchema* schema = nullptr);
Dataset read_dataset(const std::string& path, const CategoricalSchema* schema = nullptr);

// Canonical CSV: header, then codes with NA for missing.
std::string format_dataset(const Dataset& data);

// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

} // namespace dpmcpm

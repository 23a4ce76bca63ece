#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace hamprune {

enum class FieldKind : uint8_t { kCategorical = 0, kNumeric = 1 };

inline constexpr const char* kUnknownToken = "<unknown>";

/// Vocabulary of one feature field. Retained values get dense indices in
/// first-appearance order; the last index is reserved for "unknown" and
/// absorbs thresholded-away and unseen values.
struct FieldSchema {
    std::string name;
    FieldKind kind = FieldKind::kCategorical;
    uint32_t cardinality = 0;  // retained values + 1
    std::unordered_map<std::string, uint32_t> to_index;

    uint32_t unknown_index() const { return cardinality - 1; }

    uint32_t encode(const std::string& value) const {
        auto it = to_index.find(value);
        return it == to_index.end() ? unknown_index() : it->second;
    }
};

struct FeatureSchema {
    std::vector<FieldSchema> fields;

    size_t field_count() const { return fields.size(); }
    uint64_t hash() const;
    /// Reverse lookup for reports; returns the unknown token for the
    /// reserved index.
    std::string value_of(size_t field, uint32_t index) const;
};

enum class SplitTag : uint8_t { kAll = 0, kTrain = 1, kVal = 2, kTest = 3 };

struct Dataset {
    std::shared_ptr<const FeatureSchema> schema;
    std::vector<uint32_t> idx;  // row-major, n_rows x field_count
    std::vector<uint8_t> labels;
    SplitTag tag = SplitTag::kAll;

    size_t n_rows() const { return labels.size(); }
    size_t n_fields() const { return schema->field_count(); }
    uint32_t at(size_t row, size_t field) const { return idx[row * n_fields() + field]; }
    void validate() const;  // index bounds and binary labels
};

struct Splits {
    Dataset train, val, test;
};

/// Raw string-valued table; the staging format between parsers and the
/// schema builder.
struct RawTable {
    std::vector<std::string> field_names;
    std::vector<FieldKind> kinds;
    std::vector<std::vector<std::string>> columns;  // per field, n_rows entries
    std::vector<uint8_t> labels;

    size_t n_rows() const { return labels.size(); }
};

// -- preprocessing -----------------------------------------------------------

/// Values with frequency < threshold are dropped from the vocabulary (they
/// will encode to the unknown index); survivors are indexed in
/// first-appearance order.
std::unordered_map<std::string, uint32_t> threshold_infrequent(
    const std::vector<std::string>& raw_column, size_t threshold);

/// Numeric-to-categorical binning: z -> floor(ln(int(z))^2) when int(z) > 2,
/// else int(z) - 2; int() truncates toward zero.
long long discretize_numeric(double z);

/// Token variant; non-numeric or empty tokens map to the unknown token.
std::string discretize_token(const std::string& token);

FeatureSchema build_schema(const RawTable& raw, size_t threshold);

/// Applies discretize_token to every numeric column, in place.
void discretize_numeric_columns(RawTable& raw);

Dataset encode(const RawTable& raw, std::shared_ptr<const FeatureSchema> schema);

/// Random row partition with proportions rounded to the nearest row,
/// reproducible from the seed.
Splits split(const Dataset& data, const std::array<double, 3>& ratios, uint64_t seed);

/// Partition raw rows, build the vocabulary (from all rows, or from the
/// training rows only when count_on_full is false), and encode each part.
Splits split_raw_encode(const RawTable& raw, const std::array<double, 3>& ratios, uint64_t seed,
                        size_t threshold, bool count_on_full = true);

// -- CSV ---------------------------------------------------------------------

/// Header row required; the label column (default "label") holds 0/1.
/// Fields listed in numeric_fields are discretized before vocabulary
/// building.
RawTable read_csv(const std::string& path, const std::string& label_column = "label",
                  const std::vector<std::string>& numeric_fields = {});

// -- MovieLens ---------------------------------------------------------------

/// Reads ratings.dat (and users.dat / movies.dat when present) from a
/// MovieLens-1M style directory. Ratings > 3 are positive, < 3 negative,
/// and neutral rows are dropped.
RawTable load_movielens(const std::string& dir);

// -- synthetic ---------------------------------------------------------------

/// One field of a planted-signal task. latent_rank controls how many
/// independent latent directions the field contributes to the label; rank 0
/// means the field has no label influence.
struct SyntheticField {
    uint32_t cardinality = 2;
    uint32_t latent_rank = 0;
    double scale = 1.0;
};

struct SyntheticSpec {
    std::vector<SyntheticField> fields;
    double bias = 0.0;
    double interaction_scale = 1.0;
};

/// Labels are Bernoulli draws from a logistic model over pairwise inner
/// products of per-value latent vectors, so a field's attainable signal
/// genuinely requires latent_rank embedding columns.
Dataset synthesize(const SyntheticSpec& spec, size_t n_rows, uint64_t seed);

// -- cache -------------------------------------------------------------------

void write_cache(const std::string& path, const Dataset& data);
Dataset read_cache(const std::string& path);

// -- batching ----------------------------------------------------------------

struct Batch {
    std::vector<std::vector<uint32_t>> field_idx;  // one index array per field
    std::vector<double> labels;

    size_t size() const { return labels.size(); }
};

Batch make_batch(const Dataset& data, const std::vector<size_t>& rows);

/// Cycles through shuffled mini-batches; reshuffles at each epoch boundary.
class BatchSampler {
  public:
    BatchSampler(size_t n_rows, size_t batch_size, uint64_t seed);

    size_t batches_per_epoch() const { return batches_per_epoch_; }
    std::vector<size_t> next_rows();

  private:
    size_t batch_size_;
    size_t batches_per_epoch_;
    std::vector<size_t> order_;
    size_t pos_ = 0;
    std::mt19937_64 rng_;
};

}  // namespace hamprune

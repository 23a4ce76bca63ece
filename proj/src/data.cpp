#include "hamprune/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hamprune/rng.hpp"

namespace hamprune {

// -- schema ------------------------------------------------------------------

uint64_t FeatureSchema::hash() const {
    // FNV-1a over a canonical rendering; indices are included so any
    // remapping changes the hash.
    uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        h ^= 0xff;
        h *= 1099511628211ULL;
    };
    for (const auto& f : fields) {
        mix(f.name);
        mix(std::to_string(int(f.kind)));
        mix(std::to_string(f.cardinality));
        std::vector<std::pair<std::string, uint32_t>> entries(f.to_index.begin(),
                                                              f.to_index.end());
        std::sort(entries.begin(), entries.end());
        for (auto& [v, i] : entries) {
            mix(v);
            mix(std::to_string(i));
        }
    }
    return h;
}

std::string FeatureSchema::value_of(size_t field, uint32_t index) const {
    const auto& f = fields.at(field);
    if (index == f.unknown_index()) return kUnknownToken;
    for (const auto& [v, i] : f.to_index)
        if (i == index) return v;
    throw std::out_of_range("schema: index not present in field " + f.name);
}

void Dataset::validate() const {
    size_t k = n_fields();
    if (idx.size() != labels.size() * k)
        throw std::runtime_error("dataset: index/label size mismatch");
    for (size_t r = 0; r < n_rows(); ++r) {
        if (labels[r] > 1) throw std::runtime_error("dataset: label not binary");
        for (size_t j = 0; j < k; ++j)
            if (at(r, j) >= schema->fields[j].cardinality)
                throw std::runtime_error("dataset: index exceeds cardinality in field " +
                                         schema->fields[j].name);
    }
}

// -- preprocessing -----------------------------------------------------------

std::unordered_map<std::string, uint32_t> threshold_infrequent(
    const std::vector<std::string>& raw_column, size_t threshold) {
    if (raw_column.empty()) throw std::invalid_argument("threshold_infrequent: empty column");
    std::unordered_map<std::string, size_t> freq;
    for (const auto& v : raw_column) ++freq[v];
    std::unordered_map<std::string, uint32_t> map;
    uint32_t next = 0;
    for (const auto& v : raw_column) {
        if (freq[v] < threshold) continue;
        if (map.emplace(v, next).second) ++next;
    }
    return map;
}

long long discretize_numeric(double z) {
    long long i = static_cast<long long>(std::trunc(z));
    if (i > 2) {
        double l = std::log(double(i));
        return static_cast<long long>(std::floor(l * l));
    }
    return i - 2;
}

std::string discretize_token(const std::string& token) {
    if (token.empty()) return kUnknownToken;
    char* end = nullptr;
    double z = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0' || !std::isfinite(z)) return kUnknownToken;
    return std::to_string(discretize_numeric(z));
}

void discretize_numeric_columns(RawTable& raw) {
    for (size_t j = 0; j < raw.columns.size(); ++j) {
        if (raw.kinds[j] != FieldKind::kNumeric) continue;
        for (auto& v : raw.columns[j]) v = discretize_token(v);
    }
}

FeatureSchema build_schema(const RawTable& raw, size_t threshold) {
    FeatureSchema schema;
    for (size_t j = 0; j < raw.columns.size(); ++j) {
        FieldSchema f;
        f.name = raw.field_names[j];
        f.kind = raw.kinds[j];
        f.to_index = threshold_infrequent(raw.columns[j], threshold);
        f.cardinality = uint32_t(f.to_index.size()) + 1;
        schema.fields.push_back(std::move(f));
    }
    return schema;
}

Dataset encode(const RawTable& raw, std::shared_ptr<const FeatureSchema> schema) {
    if (schema->field_count() != raw.columns.size())
        throw std::invalid_argument("encode: schema/table field count mismatch");
    Dataset d;
    d.schema = std::move(schema);
    size_t k = raw.columns.size();
    d.labels = raw.labels;
    d.idx.resize(raw.n_rows() * k);
    for (size_t r = 0; r < raw.n_rows(); ++r)
        for (size_t j = 0; j < k; ++j)
            d.idx[r * k + j] = d.schema->fields[j].encode(raw.columns[j][r]);
    return d;
}

Splits split(const Dataset& data, const std::array<double, 3>& ratios, uint64_t seed) {
    double total = 0.0;
    for (double r : ratios) {
        if (r < 0) throw std::invalid_argument("split: negative ratio");
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split: ratios must sum to 1");

    size_t n = data.n_rows();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    size_t cut1 = size_t(std::llround(ratios[0] * double(n)));
    size_t cut2 = size_t(std::llround((ratios[0] + ratios[1]) * double(n)));
    cut1 = std::min(cut1, n);
    cut2 = std::min(std::max(cut2, cut1), n);

    auto take = [&](size_t lo, size_t hi, SplitTag tag) {
        Dataset part;
        part.schema = data.schema;
        part.tag = tag;
        size_t k = data.n_fields();
        part.labels.reserve(hi - lo);
        part.idx.reserve((hi - lo) * k);
        for (size_t i = lo; i < hi; ++i) {
            size_t r = order[i];
            part.labels.push_back(data.labels[r]);
            for (size_t j = 0; j < k; ++j) part.idx.push_back(data.at(r, j));
        }
        return part;
    };
    return {take(0, cut1, SplitTag::kTrain), take(cut1, cut2, SplitTag::kVal),
            take(cut2, n, SplitTag::kTest)};
}

Splits split_raw_encode(const RawTable& raw, const std::array<double, 3>& ratios, uint64_t seed,
                        size_t threshold, bool count_on_full) {
    RawTable vocab_source = raw;
    if (!count_on_full) {
        // Count frequencies on the training rows only. The shuffle below is
        // the same one split() applies, so the partition lines up.
        size_t n = raw.n_rows();
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t(0));
        Rng rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
        size_t cut1 = std::min(size_t(std::llround(ratios[0] * double(n))), n);
        vocab_source.labels.clear();
        for (auto& col : vocab_source.columns) col.clear();
        for (size_t i = 0; i < cut1; ++i) {
            size_t r = order[i];
            vocab_source.labels.push_back(raw.labels[r]);
            for (size_t j = 0; j < raw.columns.size(); ++j)
                vocab_source.columns[j].push_back(raw.columns[j][r]);
        }
    }
    auto schema = std::make_shared<FeatureSchema>(build_schema(vocab_source, threshold));
    Dataset full = encode(raw, schema);
    return split(full, ratios, seed);
}

// -- CSV ---------------------------------------------------------------------

namespace {

std::vector<std::string> parse_csv_record(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c == '\r') {
            // tolerate CRLF
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

}  // namespace

RawTable read_csv(const std::string& path, const std::string& label_column,
                  const std::vector<std::string>& numeric_fields) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_csv: empty file " + path);
    auto header = parse_csv_record(line);

    size_t label_col = header.size();
    for (size_t j = 0; j < header.size(); ++j)
        if (header[j] == label_column) label_col = j;
    if (label_col == header.size())
        throw std::runtime_error("read_csv: no '" + label_column + "' column in " + path);

    RawTable raw;
    for (size_t j = 0; j < header.size(); ++j) {
        if (j == label_col) continue;
        raw.field_names.push_back(header[j]);
        bool numeric = std::find(numeric_fields.begin(), numeric_fields.end(), header[j]) !=
                       numeric_fields.end();
        raw.kinds.push_back(numeric ? FieldKind::kNumeric : FieldKind::kCategorical);
    }
    raw.columns.resize(raw.field_names.size());

    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto rec = parse_csv_record(line);
        if (rec.size() != header.size())
            throw std::runtime_error("read_csv: bad field count at line " +
                                     std::to_string(lineno));
        const std::string& lab = rec[label_col];
        if (lab != "0" && lab != "1")
            throw std::runtime_error("read_csv: label must be 0/1 at line " +
                                     std::to_string(lineno));
        raw.labels.push_back(lab == "1" ? 1 : 0);
        size_t out_j = 0;
        for (size_t j = 0; j < rec.size(); ++j) {
            if (j == label_col) continue;
            raw.columns[out_j++].push_back(std::move(rec[j]));
        }
    }
    discretize_numeric_columns(raw);
    return raw;
}

// -- MovieLens ---------------------------------------------------------------

namespace {

std::vector<std::string> split_double_colon(const std::string& line) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (true) {
        size_t next = line.find("::", pos);
        if (next == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, next - pos));
        pos = next + 2;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

}  // namespace

RawTable load_movielens(const std::string& dir) {
    std::ifstream ratings(dir + "/ratings.dat");
    if (!ratings) throw std::runtime_error("load_movielens: cannot open " + dir + "/ratings.dat");

    std::unordered_map<std::string, std::array<std::string, 4>> users;  // gender,age,occ,zip
    std::unordered_map<std::string, std::string> genres;
    std::ifstream users_in(dir + "/users.dat");
    std::string line;
    while (users_in && std::getline(users_in, line)) {
        auto f = split_double_colon(line);
        if (f.size() >= 5) users[f[0]] = {f[1], f[2], f[3], f[4]};
    }
    std::ifstream movies_in(dir + "/movies.dat");
    while (movies_in && std::getline(movies_in, line)) {
        auto f = split_double_colon(line);
        if (f.size() >= 3) {
            std::string g = f[2];
            size_t bar = g.find('|');
            genres[f[0]] = bar == std::string::npos ? g : g.substr(0, bar);
        }
    }

    bool has_users = !users.empty();
    bool has_movies = !genres.empty();
    RawTable raw;
    raw.field_names = {"user", "movie"};
    if (has_users) {
        raw.field_names.push_back("gender");
        raw.field_names.push_back("age");
        raw.field_names.push_back("occupation");
        raw.field_names.push_back("zip");
    }
    if (has_movies) raw.field_names.push_back("genre");
    raw.kinds.assign(raw.field_names.size(), FieldKind::kCategorical);
    raw.columns.resize(raw.field_names.size());

    while (std::getline(ratings, line)) {
        auto f = split_double_colon(line);
        if (f.size() < 3) continue;
        int rating = std::atoi(f[2].c_str());
        if (rating == 3) continue;  // neutral rows dropped
        raw.labels.push_back(rating > 3 ? 1 : 0);
        size_t j = 0;
        raw.columns[j++].push_back(f[0]);
        raw.columns[j++].push_back(f[1]);
        if (has_users) {
            auto it = users.find(f[0]);
            std::array<std::string, 4> u =
                it == users.end() ? std::array<std::string, 4>{"", "", "", ""} : it->second;
            for (const auto& s : u) raw.columns[j++].push_back(s);
        }
        if (has_movies) {
            auto it = genres.find(f[1]);
            raw.columns[j++].push_back(it == genres.end() ? "" : it->second);
        }
    }
    if (raw.labels.empty()) throw std::runtime_error("load_movielens: no usable rows");
    return raw;
}

// -- synthetic ---------------------------------------------------------------

Dataset synthesize(const SyntheticSpec& spec, size_t n_rows, uint64_t seed) {
    if (spec.fields.empty()) throw std::invalid_argument("synthesize: no fields");
    if (n_rows == 0) throw std::invalid_argument("synthesize: n_rows must be positive");
    size_t rank_total = 0;
    for (const auto& f : spec.fields) {
        if (f.cardinality < 1) throw std::invalid_argument("synthesize: cardinality must be >= 1");
        if (f.latent_rank > f.cardinality)
            throw std::invalid_argument("synthesize: latent rank exceeds cardinality");
        rank_total = std::max(rank_total, size_t(f.latent_rank));
    }
    size_t dim = std::max<size_t>(rank_total, 1);

    Rng rng(mix_seed(seed, 0xda7a));
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Per-value latent vectors; only the first latent_rank coordinates are
    // active, so a rank-0 field never moves the label.
    size_t k = spec.fields.size();
    std::vector<std::vector<double>> latents(k);
    for (size_t j = 0; j < k; ++j) {
        const auto& f = spec.fields[j];
        latents[j].assign(size_t(f.cardinality) * dim, 0.0);
        double sd = f.scale / std::pow(double(std::max<uint32_t>(f.latent_rank, 1)), 0.25);
        for (size_t v = 0; v < f.cardinality; ++v)
            for (size_t r = 0; r < f.latent_rank; ++r) latents[j][v * dim + r] = sd * gauss(rng);
    }

    auto schema = std::make_shared<FeatureSchema>();
    for (size_t j = 0; j < k; ++j) {
        FieldSchema f;
        f.name = "f" + std::to_string(j);
        f.kind = FieldKind::kCategorical;
        f.cardinality = spec.fields[j].cardinality;
        for (uint32_t v = 0; v + 1 < f.cardinality; ++v) f.to_index[std::to_string(v)] = v;
        schema->fields.push_back(std::move(f));
    }

    Dataset d;
    d.schema = schema;
    d.idx.resize(n_rows * k);
    d.labels.resize(n_rows);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (size_t r = 0; r < n_rows; ++r) {
        double logit = spec.bias;
        for (size_t j = 0; j < k; ++j) {
            uint32_t v = uint32_t(unif(rng) * double(spec.fields[j].cardinality));
            v = std::min(v, spec.fields[j].cardinality - 1);
            d.idx[r * k + j] = v;
        }
        for (size_t a = 0; a < k; ++a)
            for (size_t b = a + 1; b < k; ++b) {
                const double* ua = &latents[a][size_t(d.idx[r * k + a]) * dim];
                const double* ub = &latents[b][size_t(d.idx[r * k + b]) * dim];
                double dot = 0;
                for (size_t t = 0; t < dim; ++t) dot += ua[t] * ub[t];
                logit += spec.interaction_scale * dot;
            }
        double p = 1.0 / (1.0 + std::exp(-logit));
        d.labels[r] = unif(rng) < p ? 1 : 0;
    }
    return d;
}

// -- cache -------------------------------------------------------------------

namespace {

constexpr char kCacheMagic[8] = {'H', 'A', 'M', 'D', 'S', '0', '0', '1'};

template <typename T>
void put(std::ostream& out, const T& x) {
    out.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T x{};
    in.read(reinterpret_cast<char*>(&x), sizeof(T));
    if (!in) throw std::runtime_error("cache: truncated file");
    return x;
}

void put_string(std::ostream& out, const std::string& s) {
    put<uint32_t>(out, uint32_t(s.size()));
    out.write(s.data(), std::streamsize(s.size()));
}

std::string get_string(std::istream& in) {
    uint32_t n = get<uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw std::runtime_error("cache: truncated string");
    return s;
}

}  // namespace

void write_cache(const std::string& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_cache: cannot open " + path);
    out.write(kCacheMagic, 8);
    put<uint32_t>(out, uint32_t(data.n_fields()));
    put<uint64_t>(out, uint64_t(data.n_rows()));
    put<uint8_t>(out, uint8_t(data.tag));
    for (const auto& f : data.schema->fields) {
        put_string(out, f.name);
        put<uint8_t>(out, uint8_t(f.kind));
        put<uint32_t>(out, f.cardinality);
        std::vector<std::pair<std::string, uint32_t>> entries(f.to_index.begin(),
                                                              f.to_index.end());
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) { return a.second < b.second; });
        put<uint32_t>(out, uint32_t(entries.size()));
        for (auto& [v, i] : entries) {
            put_string(out, v);
            put<uint32_t>(out, i);
        }
    }
    out.write(reinterpret_cast<const char*>(data.labels.data()),
              std::streamsize(data.labels.size()));
    out.write(reinterpret_cast<const char*>(data.idx.data()),
              std::streamsize(data.idx.size() * sizeof(uint32_t)));
    if (!out) throw std::runtime_error("write_cache: write failed");
}

// -- batching ----------------------------------------------------------------

Batch make_batch(const Dataset& data, const std::vector<size_t>& rows) {
    size_t k = data.n_fields();
    Batch b;
    b.field_idx.resize(k);
    for (auto& col : b.field_idx) col.reserve(rows.size());
    b.labels.reserve(rows.size());
    for (size_t r : rows) {
        b.labels.push_back(double(data.labels[r]));
        for (size_t j = 0; j < k; ++j) b.field_idx[j].push_back(data.at(r, j));
    }
    return b;
}

BatchSampler::BatchSampler(size_t n_rows, size_t batch_size, uint64_t seed)
    : batch_size_(std::max<size_t>(1, batch_size)), order_(n_rows), rng_(seed) {
    if (n_rows == 0) throw std::invalid_argument("batch sampler: empty dataset");
    std::iota(order_.begin(), order_.end(), size_t(0));
    std::shuffle(order_.begin(), order_.end(), rng_);
    batches_per_epoch_ = (n_rows + batch_size_ - 1) / batch_size_;
}

std::vector<size_t> BatchSampler::next_rows() {
    if (pos_ >= order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
    }
    size_t hi = std::min(pos_ + batch_size_, order_.size());
    std::vector<size_t> rows(order_.begin() + std::ptrdiff_t(pos_),
                             order_.begin() + std::ptrdiff_t(hi));
    pos_ = hi;
    return rows;
}

Dataset read_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_cache: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || !std::equal(magic, magic + 8, kCacheMagic))
        throw std::runtime_error("read_cache: bad magic in " + path);
    uint32_t k = get<uint32_t>(in);
    uint64_t n = get<uint64_t>(in);
    auto tag = SplitTag(get<uint8_t>(in));
    auto schema = std::make_shared<FeatureSchema>();
    for (uint32_t j = 0; j < k; ++j) {
        FieldSchema f;
        f.name = get_string(in);
        f.kind = FieldKind(get<uint8_t>(in));
        f.cardinality = get<uint32_t>(in);
        uint32_t m = get<uint32_t>(in);
        for (uint32_t e = 0; e < m; ++e) {
            std::string v = get_string(in);
            f.to_index[v] = get<uint32_t>(in);
        }
        schema->fields.push_back(std::move(f));
    }
    Dataset d;
    d.schema = schema;
    d.tag = tag;
    d.labels.resize(n);
    in.read(reinterpret_cast<char*>(d.labels.data()), std::streamsize(n));
    d.idx.resize(n * k);
    in.read(reinterpret_cast<char*>(d.idx.data()), std::streamsize(d.idx.size() * sizeof(uint32_t)));
    if (!in) throw std::runtime_error("read_cache: truncated data in " + path);
    d.validate();
    return d;
}

}  // namespace hamprune

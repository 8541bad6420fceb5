#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "amd/errors.hpp"
#include "amd/types.hpp"
#include "amd/util.hpp"

namespace amd {

struct DenseVector {
    std::vector<double> values;
    double norm = 0.0;  // cached L2 norm

    static DenseVector of(std::vector<double> v) {
        DenseVector out;
        out.values = std::move(v);
        double sq = 0.0;
        for (double x : out.values) {
            if (!std::isfinite(x)) throw Error("non-finite vector component");
            sq += x * x;
        }
        out.norm = std::sqrt(sq);
        return out;
    }

    size_t dimension() const { return values.size(); }
};

inline double cosine(const DenseVector& u, const DenseVector& v) {
    if (u.dimension() != v.dimension())
        throw Error("cosine: dimension mismatch (" + std::to_string(u.dimension()) + " vs " +
                    std::to_string(v.dimension()) + ")");
    if (u.norm <= 0.0 || v.norm <= 0.0) throw Error("cosine: zero-norm vector");
    double dot = 0.0;
    for (size_t i = 0; i < u.values.size(); ++i) dot += u.values[i] * v.values[i];
    return dot / (u.norm * v.norm);
}

// Row-major N x D matrix with an ordinal<->doc_id table. Search is an
// exhaustive exact scan; immutable after build, safe to share across threads.
class VectorIndex {
public:
    VectorIndex(uint32_t dimension, std::string model_id)
        : dimension_(dimension), model_id_(std::move(model_id)) {
        if (dimension == 0) throw Error("vector index dimension must be > 0");
    }

    void add_row(const std::string& doc_id, const DenseVector& vec) {
        if (vec.dimension() != dimension_)
            throw Error("row dimension " + std::to_string(vec.dimension()) + " != index dimension " +
                        std::to_string(dimension_));
        if (vec.norm <= 0.0) throw Error("zero-norm row for doc '" + doc_id + "'");
        doc_ids_.push_back(doc_id);
        norms_.push_back(vec.norm);
        matrix_.insert(matrix_.end(), vec.values.begin(), vec.values.end());
    }

    size_t row_count() const { return doc_ids_.size(); }
    uint32_t dimension() const { return dimension_; }
    const std::string& model_id() const { return model_id_; }
    const std::string& doc_id(size_t row) const { return doc_ids_.at(row); }

    DenseVector row(size_t i) const {
        const double* base = matrix_.data() + i * dimension_;
        return DenseVector{{base, base + dimension_}, norms_[i]};
    }

    // Top-k by cosine similarity descending, ties by ascending doc_id.
    Ranking search(const DenseVector& query, size_t k) const {
        if (query.dimension() != dimension_)
            throw Error("query dimension " + std::to_string(query.dimension()) +
                        " != index dimension " + std::to_string(dimension_));
        if (query.norm <= 0.0) throw Error("zero-norm query vector");
        std::vector<size_t> rows(row_count());
        std::vector<double> sims(row_count());
        for (size_t i = 0; i < row_count(); ++i) {
            rows[i] = i;
            const double* base = matrix_.data() + i * dimension_;
            double dot = 0.0;
            for (size_t d = 0; d < dimension_; ++d) dot += query.values[d] * base[d];
            sims[i] = dot / (query.norm * norms_[i]);
        }
        std::sort(rows.begin(), rows.end(), [&](size_t a, size_t b) {
            if (sims[a] != sims[b]) return sims[a] > sims[b];
            return doc_ids_[a] < doc_ids_[b];
        });
        Ranking out;
        out.reserve(std::min(k, rows.size()));
        for (size_t i = 0; i < rows.size() && out.size() < k; ++i)
            out.push_back({doc_ids_[rows[i]], sims[rows[i]]});
        return out;
    }

    // --- persistence -------------------------------------------------------

    static constexpr uint32_t kFormatVersion = 1;

    void save(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        {
            std::ofstream out(dir / "vectors.bin", std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot write " + (dir / "vectors.bin").string());
            out.write("AMDDVECS", 8);
            write_u32(out, kFormatVersion);
            write_u64(out, row_count());
            write_u32(out, dimension_);
            for (size_t i = 0; i < row_count(); ++i) {
                write_u32(out, static_cast<uint32_t>(doc_ids_[i].size()));
                out.write(doc_ids_[i].data(), static_cast<std::streamsize>(doc_ids_[i].size()));
                const double* base = matrix_.data() + i * dimension_;
                for (uint32_t d = 0; d < dimension_; ++d) write_f64(out, base[d]);
            }
        }
        nlohmann::json meta{{"format_version", kFormatVersion},
                            {"kind", "dense"},
                            {"model_id", model_id_},
                            {"dimension", dimension_},
                            {"row_count", row_count()}};
        atomic_write_file(dir / "meta.json", meta.dump(2) + "\n");
    }

    static VectorIndex load(const std::filesystem::path& dir) {
        nlohmann::json meta = nlohmann::json::parse(read_file(dir / "meta.json"));
        if (meta.at("kind").get<std::string>() != "dense")
            throw Error(dir.string() + " is not a dense index (kind=" +
                        meta.at("kind").get<std::string>() + ")");
        if (meta.at("format_version").get<uint32_t>() != kFormatVersion)
            throw Error("unsupported dense index format_version");
        VectorIndex index(meta.at("dimension").get<uint32_t>(), meta.at("model_id").get<std::string>());
        std::ifstream in(dir / "vectors.bin", std::ios::binary);
        if (!in) throw Error("cannot open " + (dir / "vectors.bin").string());
        if (read_bytes(in, 8) != "AMDDVECS") throw Error("bad vectors.bin magic");
        if (read_u32(in) != kFormatVersion) throw Error("unsupported vectors.bin version");
        uint64_t rows = read_u64(in);
        uint32_t dim = read_u32(in);
        if (dim != index.dimension_) throw Error("vectors.bin dimension disagrees with meta.json");
        for (uint64_t i = 0; i < rows; ++i) {
            uint32_t len = read_u32(in);
            std::string id = read_bytes(in, len);
            std::vector<double> values(dim);
            for (uint32_t d = 0; d < dim; ++d) values[d] = read_f64(in);
            index.add_row(id, DenseVector::of(std::move(values)));
        }
        if (index.row_count() != meta.at("row_count").get<uint64_t>())
            throw Error("vectors.bin row count disagrees with meta.json");
        return index;
    }

private:
    uint32_t dimension_;
    std::string model_id_;
    std::vector<std::string> doc_ids_;
    std::vector<double> norms_;
    std::vector<double> matrix_;  // row-major
};

}  // namespace amd

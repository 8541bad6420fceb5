#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "amd/dense.hpp"
#include "amd/errors.hpp"
#include "amd/util.hpp"

namespace amd {

enum class EmbedRole { query, passage };

// endpoint is either an http(s) URL or one of the mock names
// "hash-mock" / "scripted-mock".
struct EmbeddingProviderConfig {
    std::string endpoint = "hash-mock";
    std::string model_id = "hash-mock";
    uint32_t dimension = 64;
    std::string query_prefix = "query: ";
    std::string passage_prefix = "passage: ";
    size_t batch_size = 16;
    int max_retries = 2;
    int timeout_sec = 30;
    int backoff_ms = 200;
    std::string fixture_path;  // scripted-mock responses
    std::string api_key;
};

// Transport-level contract: one vector per input text, in order. Role
// prefixes are applied by the engine before this is called.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) = 0;
    virtual uint32_t dimension() const = 0;
};

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

// Deterministic stand-in for a real encoder: every text maps to a fixed
// pseudo-random unit vector, so retrieval tests run without a model.
class HashMockEmbedder : public Embedder {
public:
    explicit HashMockEmbedder(uint32_t dimension) : dimension_(dimension) {}

    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override {
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& text : texts) out.push_back(embed_one(text));
        return out;
    }

    uint32_t dimension() const override { return dimension_; }

private:
    std::vector<double> embed_one(const std::string& text) const {
        uint64_t seed = fnv1a64(text);
        std::vector<double> v(dimension_);
        double sq = 0.0;
        for (uint32_t i = 0; i < dimension_; ++i) {
            uint64_t bits = detail::splitmix64(seed + i);
            // 53 high bits -> [0,1) -> [-1,1)
            double u = static_cast<double>(bits >> 11) * (1.0 / 9007199254740992.0);
            v[i] = 2.0 * u - 1.0;
            sq += v[i] * v[i];
        }
        double norm = std::sqrt(sq);
        if (norm < 1e-12) {
            v[0] = 1.0;
            return v;
        }
        for (double& x : v) x /= norm;
        return v;
    }

    uint32_t dimension_;
};

// Fixed vectors from a fixture file, keyed by the exact (prefixed) text the
// provider receives. Fixture: {"version":1,"dimension":D,"vectors":{text:[..]}}
class ScriptedEmbedder : public Embedder {
public:
    explicit ScriptedEmbedder(const std::filesystem::path& fixture_path) {
        nlohmann::json doc = nlohmann::json::parse(read_file(fixture_path));
        dimension_ = doc.at("dimension").get<uint32_t>();
        for (const auto& [text, vec] : doc.at("vectors").items()) {
            auto values = vec.get<std::vector<double>>();
            if (values.size() != dimension_)
                throw Error("fixture vector for '" + text + "' has wrong dimension");
            vectors_.emplace(text, std::move(values));
        }
    }

    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override {
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& text : texts) {
            auto it = vectors_.find(text);
            if (it == vectors_.end()) throw Error("no scripted embedding for text: '" + text + "'");
            out.push_back(it->second);
        }
        return out;
    }

    uint32_t dimension() const override { return dimension_; }

private:
    uint32_t dimension_;
    std::map<std::string, std::vector<double>> vectors_;
};

// Applies the role prefix, batches, retries transport failures with backoff,
// and validates dimensions. Output order always matches input order.
inline std::vector<DenseVector> embed(const std::vector<std::string>& texts, EmbedRole role,
                                      Embedder& provider, const EmbeddingProviderConfig& config) {
    std::vector<DenseVector> out;
    out.reserve(texts.size());
    const std::string& prefix =
        role == EmbedRole::query ? config.query_prefix : config.passage_prefix;
    size_t batch_size = config.batch_size == 0 ? 1 : config.batch_size;
    for (size_t start = 0; start < texts.size(); start += batch_size) {
        size_t end = std::min(texts.size(), start + batch_size);
        std::vector<std::string> batch;
        batch.reserve(end - start);
        for (size_t i = start; i < end; ++i) batch.push_back(prefix + texts[i]);
        std::vector<std::vector<double>> vectors;
        for (int attempt = 0;; ++attempt) {
            try {
                vectors = provider.embed_batch(batch);
                break;
            } catch (const TransportError&) {
                if (attempt >= config.max_retries) throw;
                std::this_thread::sleep_for(std::chrono::milliseconds(config.backoff_ms * (attempt + 1)));
            }
        }
        if (vectors.size() != batch.size())
            throw Error("provider returned " + std::to_string(vectors.size()) + " vectors for " +
                        std::to_string(batch.size()) + " inputs");
        for (auto& values : vectors) {
            if (values.size() != config.dimension)
                throw Error("embedding dimension " + std::to_string(values.size()) +
                            " != configured " + std::to_string(config.dimension));
            out.push_back(DenseVector::of(std::move(values)));
        }
    }
    return out;
}

// Streams documents through the embedder with the passage role; title and
// body embed as one field, matching the sparse index composition.
template <typename NextDocument>
VectorIndex build_vector_index(NextDocument&& next_document, Embedder& provider,
                               const EmbeddingProviderConfig& config) {
    VectorIndex index(config.dimension, config.model_id);
    std::vector<std::string> ids;
    std::vector<std::string> batch;
    size_t batch_size = config.batch_size == 0 ? 1 : config.batch_size;
    auto flush = [&]() {
        if (batch.empty()) return;
        auto vectors = embed(batch, EmbedRole::passage, provider, config);
        for (size_t i = 0; i < vectors.size(); ++i) index.add_row(ids[i], vectors[i]);
        ids.clear();
        batch.clear();
    };
    while (auto doc = next_document()) {
        ids.push_back(doc->doc_id);
        batch.push_back(doc->title.empty() ? doc->text : doc->title + " " + doc->text);
        if (batch.size() >= batch_size) flush();
    }
    flush();
    return index;
}

}  // namespace amd

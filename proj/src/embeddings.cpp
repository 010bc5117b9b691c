#include "etmkit/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include <boost/iostreams/filter/bzip2.hpp>
#include <boost/iostreams/filtering_stream.hpp>
#include <spdlog/spdlog.h>

#include "etmkit/error.hpp"
#include "etmkit/hash.hpp"
#include "etmkit/random.hpp"

namespace etm {
namespace {

// Splits on runs of spaces/tabs.
void split_fields(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
}

bool parse_double(std::string_view s, double& value) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(value);
}

}  // namespace

const Eigen::VectorXd* EmbeddingStore::find(std::string_view key) const {
  const auto it = vectors_.find(std::string(key));
  return it == vectors_.end() ? nullptr : &it->second;
}

bool EmbeddingStore::insert(std::string key, Eigen::VectorXd vec) {
  if (static_cast<std::size_t>(vec.size()) != dim_)
    throw DataError("embedding for '" + key + "' has wrong dimension");
  return vectors_.emplace(std::move(key), std::move(vec)).second;
}

EmbeddingStore parse_embeddings(std::istream& in, std::optional<std::size_t> expected_dim,
                                const std::unordered_set<std::string>* keep_keys) {
  std::string line;
  std::vector<std::string_view> fields;
  if (!std::getline(in, line)) throw DataError("embedding file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  split_fields(line, fields);
  std::size_t count = 0;
  std::size_t dim = 0;
  if (fields.size() != 2 ||
      std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), count).ec != std::errc() ||
      std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), dim).ec != std::errc() ||
      dim == 0)
    throw DataError("embedding header must be '<count> <dim>'");
  if (expected_dim && *expected_dim != dim)
    throw DataError("embedding dimension " + std::to_string(dim) + " does not match expected " +
                    std::to_string(*expected_dim));

  EmbeddingStore store(dim);
  std::size_t lineno = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    split_fields(line, fields);
    if (fields.empty()) continue;
    ++rows;
    if (fields.size() != dim + 1)
      throw DataError("embedding row " + std::to_string(lineno) + ": expected " +
                      std::to_string(dim) + " values, found " + std::to_string(fields.size() - 1));
    std::string key(fields[0]);
    if (keep_keys && !keep_keys->contains(key)) continue;
    Eigen::VectorXd vec(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim; ++k) {
      if (!parse_double(fields[k + 1], vec[static_cast<Eigen::Index>(k)]))
        throw DataError("embedding row " + std::to_string(lineno) + ": bad value '" +
                        std::string(fields[k + 1]) + "'");
    }
    if (!store.insert(key, std::move(vec)))
      spdlog::warn("embedding row {}: duplicate key '{}' ignored (first kept)", lineno, key);
  }
  if (rows != count)
    spdlog::warn("embedding header announces {} rows, file has {}", count, rows);
  return store;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_dim,
                               const std::unordered_set<std::string>* keep_keys) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open embeddings " + path.string());
  if (path.extension() == ".bz2") {
    boost::iostreams::filtering_istream in;
    in.push(boost::iostreams::bzip2_decompressor());
    in.push(file);
    try {
      return parse_embeddings(in, expected_dim, keep_keys);
    } catch (const boost::iostreams::bzip2_error& e) {
      throw DataError("bzip2 error in " + path.string() + ": " + e.what());
    }
  }
  return parse_embeddings(file, expected_dim, keep_keys);
}

void write_embeddings(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, Eigen::VectorXd>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const std::size_t dim = rows.empty() ? 0 : static_cast<std::size_t>(rows.front().second.size());
  out << rows.size() << ' ' << dim << '\n';
  char buf[32];
  for (const auto& [key, vec] : rows) {
    out << key;
    for (Eigen::Index k = 0; k < vec.size(); ++k) {
      const auto res = std::to_chars(buf, buf + sizeof buf, vec[k]);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

std::size_t EmbeddingMatrix::count(ColumnSource source) const {
  std::size_t n = 0;
  for (auto s : column_source) n += (s == source);
  return n;
}

Eigen::VectorXd fallback_vector(std::string_view key, std::size_t dim) {
  Rng rng(fnv1a64(key));
  Eigen::VectorXd v = rng.normal_vector(static_cast<Eigen::Index>(dim));
  const double norm = v.norm();
  if (norm == 0.0) v[0] = 1.0;
  return norm == 0.0 ? v : v / norm;
}

EmbeddingMatrix build_rho(const Vocabulary& vocab, const EmbeddingStore& store,
                          double max_fallback_fraction) {
  if (store.dim() == 0) throw DataError("embedding store has dimension 0");
  const auto dim = static_cast<Eigen::Index>(store.dim());
  EmbeddingMatrix out;
  out.rho.resize(dim, static_cast<Eigen::Index>(vocab.size()));
  out.column_source.resize(vocab.size());
  for (std::size_t v = 0; v < vocab.size(); ++v) {
    const Term& term = vocab.term(static_cast<TermId>(v));
    const auto col = static_cast<Eigen::Index>(v);
    if (const auto* vec = store.find(term.surface)) {
      out.rho.col(col) = *vec;
      out.column_source[v] = term.is_entity() ? ColumnSource::EntityVector : ColumnSource::WordVector;
    } else {
      out.rho.col(col) = fallback_vector(term.surface, store.dim());
      out.column_source[v] = ColumnSource::Fallback;
    }
  }
  const std::size_t fallback = out.count(ColumnSource::Fallback);
  if (static_cast<double>(fallback) > max_fallback_fraction * static_cast<double>(vocab.size()))
    throw DataError("embedding coverage too low: " + std::to_string(fallback) + " of " +
                    std::to_string(vocab.size()) + " terms have no pretrained vector");
  if (fallback) spdlog::info("{} of {} vocabulary terms use fallback vectors", fallback, vocab.size());
  return out;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw UsageError("cosine_similarity: dimension mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw UsageError("cosine_similarity: zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

}  // namespace etm

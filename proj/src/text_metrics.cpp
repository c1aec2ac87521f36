#include "scotrl/text_metrics.hpp"

#include "scotrl/rng.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace scotrl {

using json = nlohmann::json;

namespace {

// n-gram multiset of `seq` for a single order n, keyed by the token ids.
std::map<TokenSeq, int> ngram_counts(const TokenSeq& seq, int n) {
  std::map<TokenSeq, int> counts;
  const int total = static_cast<int>(seq.size()) - n + 1;
  for (int i = 0; i < total; ++i) {
    TokenSeq gram(seq.begin() + i, seq.begin() + i + n);
    ++counts[gram];
  }
  return counts;
}

}  // namespace

double bleu(const TokenSeq& candidate, const TokenSeq& reference, int max_n) {
  if (reference.empty()) throw BadInput("bleu: empty reference");
  if (max_n < 1) throw BadInput("bleu: max_n must be >= 1");
  if (candidate.empty()) return 0.0;

  double log_precision_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    long long matched = 0;
    long long total = 0;
    for (const auto& [gram, c] : cand) {
      total += c;
      const auto it = ref.find(gram);
      if (it != ref.end()) matched += std::min(c, it->second);
    }
    double p;
    if (n == 1) {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else {
      p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
    }
    log_precision_sum += std::log(p);
  }

  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_precision_sum / static_cast<double>(max_n));
}

namespace {

Vec ngram_hash_embed(const TokenSeq& tokens, int order, int dim) {
  Vec v = Vec::Zero(dim);
  for (int n = 1; n <= order; ++n) {
    const int total = static_cast<int>(tokens.size()) - n + 1;
    for (int i = 0; i < total; ++i) {
      std::uint64_t h = splitmix64(0x5c07ULL + static_cast<std::uint64_t>(n));
      for (int j = 0; j < n; ++j)
        h = splitmix64(h ^ (static_cast<std::uint64_t>(tokens[static_cast<size_t>(i + j)]) + 0x9e37ULL));
      v(static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim))) += 1.0;
    }
  }
  return v;
}

Vec service_embed(const EmbeddingProvider& p, const TokenSeq& tokens) {
  std::ostringstream text;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) text << ' ';
    text << tokens[i];
  }
  json req;
  req["texts"] = json::array({text.str()});
  const std::string body = req.dump();

  std::string last_error = "no attempts made";
  for (int attempt = 0; attempt < std::max(1, p.retries); ++attempt) {
    httplib::Client client(p.base_url);
    client.set_connection_timeout(0, p.timeout_ms * 1000);
    client.set_read_timeout(0, p.timeout_ms * 1000);
    auto res = client.Post("/embed", body, "application/json");
    if (!res) {
      last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    try {
      json rsp = json::parse(res->body);
      const json& vecs = rsp.at("vectors");
      if (!vecs.is_array() || vecs.size() != 1 || !vecs[0].is_array() || vecs[0].empty())
        throw BadInput("embedding service: expected one nonempty vector");
      Vec v(static_cast<Eigen::Index>(vecs[0].size()));
      for (size_t i = 0; i < vecs[0].size(); ++i) v(static_cast<Eigen::Index>(i)) = vecs[0][i].get<double>();
      return v;
    } catch (const json::exception& e) {
      last_error = std::string("bad response payload: ") + e.what();
    }
  }
  throw BadInput("embedding service at " + p.base_url + " failed after " +
                 std::to_string(std::max(1, p.retries)) + " attempts: " + last_error);
}

}  // namespace

Vec EmbeddingProvider::embed(const TokenSeq& tokens) const {
  if (mode == Mode::NgramCosine) {
    if (ngram_order < 1) throw BadInput("EmbeddingProvider: ngram_order must be >= 1");
    if (dim < 1) throw BadInput("EmbeddingProvider: dim must be >= 1");
    return ngram_hash_embed(tokens, ngram_order, dim);
  }
  if (base_url.empty()) throw BadInput("EmbeddingProvider: external-service mode needs a base url");
  return service_embed(*this, tokens);
}

double semantic_sim(const TokenSeq& a, const TokenSeq& b, const EmbeddingProvider& provider) {
  const Vec va = provider.embed(a);
  const Vec vb = provider.embed(b);
  const double na = va.norm();
  const double nb = vb.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double cos = va.dot(vb) / (na * nb);
  return std::clamp(cos, 0.0, 1.0);
}

double composite_sim(const TokenSeq& a, const TokenSeq& b, const SimilarityWeights& w,
                     const EmbeddingProvider& provider, int bleu_max_n) {
  w.validate();
  return w.alpha * semantic_sim(a, b, provider) + w.beta * bleu(a, b, bleu_max_n);
}

}  // namespace scotrl

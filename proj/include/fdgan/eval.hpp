#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fdgan/image.hpp"
#include "fdgan/nn.hpp"

namespace fdgan::eval {

/// Embeddings with aligned labels. Rows are stored in double so metric
/// computation is exact and independent of the training scalar type.
struct EmbeddingMatrix {
  Eigen::MatrixXd rows;  // count x dim
  std::vector<int> identity;
  std::vector<int> camera;
  std::vector<std::string> names;  // optional per-sample identifiers
  std::string split;               // "query" or "gallery"
  bool unit_norm = false;

  Index count() const { return rows.rows(); }
  Index dim() const { return rows.cols(); }

  void validate() const {
    require(rows.rows() == static_cast<Index>(identity.size()) &&
                rows.rows() == static_cast<Index>(camera.size()),
            "embedding matrix: label count must equal row count");
    require(names.empty() || names.size() == identity.size(),
            "embedding matrix: name count must equal row count");
  }

  void l2_normalize() {
    for (Index i = 0; i < rows.rows(); ++i) {
      const double n = rows.row(i).norm();
      if (n > 0) rows.row(i) /= n;
    }
    unit_norm = true;
  }
};

/// Retrieval protocol switches.
struct EvalProtocol {
  /// Exclude gallery entries sharing both identity and camera with the query
  /// (the standard junk rule). Off is useful for synthetic single-camera data.
  bool same_camera_junk = true;
  int cmc_depth = 20;
  bool normalize = true;  // L2-normalize embeddings before ranking

  std::string describe() const {
    std::string s = "single-query, squared-euclidean";
    s += normalize ? ", l2-normalized" : ", unnormalized";
    s += same_camera_junk ? ", same-camera junk excluded" : ", no junk filtering";
    return s;
  }
};

struct EvalReport {
  double map = 0;
  std::vector<double> cmc;           // cmc[k-1] = top-k accuracy
  std::vector<double> per_query_ap;  // aligned with query order; skipped = -1
  std::vector<int> skipped_queries;  // no valid relevant gallery entry
  long tie_count = 0;                // adjacent equal distances in rankings
  int n_query = 0;
  int n_gallery = 0;
  int n_valid_query = 0;
  std::string protocol;

  double top_k(int k) const {
    require(k >= 1 && k <= static_cast<int>(cmc.size()), "top_k out of range");
    return cmc[static_cast<std::size_t>(k) - 1];
  }
};

/// Pairwise squared Euclidean distances, computed as
/// |a|^2 + |b|^2 - 2 a.b for the whole matrix at once.
inline Eigen::MatrixXd distance_matrix(const EmbeddingMatrix& queries,
                                       const EmbeddingMatrix& gallery) {
  require(queries.dim() == gallery.dim(),
          "distance_matrix: embedding dims differ");
  const Eigen::VectorXd qn = queries.rows.rowwise().squaredNorm();
  const Eigen::VectorXd gn = gallery.rows.rowwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * (queries.rows * gallery.rows.transpose());
  d.colwise() += qn;
  d.rowwise() += gn.transpose();
  return d.cwiseMax(0.0);
}

/// Pure metric core: rank each query's gallery by ascending distance (ties
/// broken by gallery index), drop junk entries, and accumulate AP and CMC.
/// Queries with no valid relevant entry are excluded from averages and listed.
inline EvalReport evaluate_distances(const Eigen::MatrixXd& dist,
                                     const std::vector<int>& query_id,
                                     const std::vector<int>& query_cam,
                                     const std::vector<int>& gallery_id,
                                     const std::vector<int>& gallery_cam,
                                     const EvalProtocol& protocol) {
  const Index nq = dist.rows(), ng = dist.cols();
  require(nq > 0 && ng > 0, "evaluate: empty query or gallery set");
  require(static_cast<Index>(query_id.size()) == nq &&
              static_cast<Index>(query_cam.size()) == nq &&
              static_cast<Index>(gallery_id.size()) == ng &&
              static_cast<Index>(gallery_cam.size()) == ng,
          "evaluate: label counts must match distance matrix");

  EvalReport rep;
  rep.n_query = static_cast<int>(nq);
  rep.n_gallery = static_cast<int>(ng);
  rep.protocol = protocol.describe();
  const int depth = std::min<int>(protocol.cmc_depth, static_cast<int>(ng));
  std::vector<long> cmc_hits(static_cast<std::size_t>(depth), 0);
  rep.per_query_ap.assign(static_cast<std::size_t>(nq), -1.0);

  std::vector<std::pair<double, Index>> order;
  for (Index q = 0; q < nq; ++q) {
    order.clear();
    int n_relevant = 0;
    for (Index g = 0; g < ng; ++g) {
      const bool junk = protocol.same_camera_junk &&
                        gallery_id[g] == query_id[q] &&
                        gallery_cam[g] == query_cam[q];
      if (junk) continue;
      order.emplace_back(dist(q, g), g);
      if (gallery_id[g] == query_id[q]) ++n_relevant;
    }
    if (n_relevant == 0) {
      rep.skipped_queries.push_back(static_cast<int>(q));
      continue;
    }
    std::sort(order.begin(), order.end());
    for (std::size_t r = 1; r < order.size(); ++r)
      if (order[r].first == order[r - 1].first) ++rep.tie_count;

    int hits = 0;
    double ap = 0;
    int first_hit_rank = -1;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (gallery_id[order[r].second] != query_id[q]) continue;
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(r + 1);
      if (first_hit_rank < 0) first_hit_rank = static_cast<int>(r + 1);
    }
    ap /= static_cast<double>(n_relevant);
    rep.per_query_ap[static_cast<std::size_t>(q)] = ap;
    rep.map += ap;
    ++rep.n_valid_query;
    for (int k = first_hit_rank; k <= depth; ++k)
      ++cmc_hits[static_cast<std::size_t>(k) - 1];
  }
  require(rep.n_valid_query > 0, "evaluate: no query has a valid match");
  rep.map /= static_cast<double>(rep.n_valid_query);
  rep.cmc.resize(static_cast<std::size_t>(depth));
  for (int k = 0; k < depth; ++k)
    rep.cmc[static_cast<std::size_t>(k)] =
        static_cast<double>(cmc_hits[static_cast<std::size_t>(k)]) /
        static_cast<double>(rep.n_valid_query);
  return rep;
}

/// Naive quadratic reference: per gallery entry, counts how many valid
/// entries beat it to derive its rank. Kept deliberately independent of
/// evaluate_distances; tests require exact agreement.
inline EvalReport reference_evaluate(const Eigen::MatrixXd& dist,
                                     const std::vector<int>& query_id,
                                     const std::vector<int>& query_cam,
                                     const std::vector<int>& gallery_id,
                                     const std::vector<int>& gallery_cam,
                                     const EvalProtocol& protocol) {
  const Index nq = dist.rows(), ng = dist.cols();
  EvalReport rep;
  rep.n_query = static_cast<int>(nq);
  rep.n_gallery = static_cast<int>(ng);
  rep.protocol = protocol.describe();
  const int depth = std::min<int>(protocol.cmc_depth, static_cast<int>(ng));
  std::vector<long> cmc_hits(static_cast<std::size_t>(depth), 0);
  rep.per_query_ap.assign(static_cast<std::size_t>(nq), -1.0);

  for (Index q = 0; q < nq; ++q) {
    std::vector<Index> valid;
    int n_relevant = 0;
    for (Index g = 0; g < ng; ++g) {
      const bool junk = protocol.same_camera_junk &&
                        gallery_id[g] == query_id[q] &&
                        gallery_cam[g] == query_cam[q];
      if (junk) continue;
      valid.push_back(g);
      if (gallery_id[g] == query_id[q]) ++n_relevant;
    }
    if (n_relevant == 0) {
      rep.skipped_queries.push_back(static_cast<int>(q));
      continue;
    }
    std::vector<long> relevant_ranks;
    for (Index g : valid) {
      if (gallery_id[g] != query_id[q]) continue;
      long rank = 1;
      for (Index h : valid) {
        if (h == g) continue;
        if (dist(q, h) < dist(q, g) ||
            (dist(q, h) == dist(q, g) && h < g))
          ++rank;
      }
      relevant_ranks.push_back(rank);
    }
    for (std::size_t a = 0; a < valid.size(); ++a)
      for (std::size_t b = a + 1; b < valid.size(); ++b)
        if (dist(q, valid[a]) == dist(q, valid[b])) ++rep.tie_count;

    std::sort(relevant_ranks.begin(), relevant_ranks.end());
    double ap = 0;
    for (std::size_t i = 0; i < relevant_ranks.size(); ++i)
      ap += static_cast<double>(i + 1) /
            static_cast<double>(relevant_ranks[i]);
    ap /= static_cast<double>(n_relevant);
    rep.per_query_ap[static_cast<std::size_t>(q)] = ap;
    rep.map += ap;
    ++rep.n_valid_query;
    for (int k = static_cast<int>(relevant_ranks.front()); k <= depth; ++k)
      ++cmc_hits[static_cast<std::size_t>(k) - 1];
  }
  require(rep.n_valid_query > 0, "evaluate: no query has a valid match");
  rep.map /= static_cast<double>(rep.n_valid_query);
  rep.cmc.resize(static_cast<std::size_t>(depth));
  for (int k = 0; k < depth; ++k)
    rep.cmc[static_cast<std::size_t>(k)] =
        static_cast<double>(cmc_hits[static_cast<std::size_t>(k)]) /
        static_cast<double>(rep.n_valid_query);
  return rep;
}

inline EvalReport evaluate(EmbeddingMatrix queries, EmbeddingMatrix gallery,
                           const EvalProtocol& protocol) {
  queries.validate();
  gallery.validate();
  if (protocol.normalize) {
    if (!queries.unit_norm) queries.l2_normalize();
    if (!gallery.unit_norm) gallery.l2_normalize();
  }
  const Eigen::MatrixXd d = distance_matrix(queries, gallery);
  return evaluate_distances(d, queries.identity, queries.camera,
                            gallery.identity, gallery.camera, protocol);
}

// ---------------------------------------------------------------------------
// encoder-only inference

/// Runs the encoder over an image list in eval mode, in fixed-size batches.
/// Takes images and labels only: the signature itself guarantees that no
/// pose landmarks are touched at test time.
template <typename S, typename Encoder>
EmbeddingMatrix extract_embeddings(Encoder& encoder,
                                   const std::vector<image::Image<S>>& images,
                                   const std::vector<int>& identity,
                                   const std::vector<int>& camera,
                                   const std::string& split,
                                   bool normalize = true, Index batch = 32) {
  require(images.size() == identity.size() && images.size() == camera.size(),
          "extract_embeddings: label count mismatch");
  require(!images.empty(), "extract_embeddings: empty sample list");
  require(batch >= 1, "extract_embeddings: batch must be >= 1");
  EmbeddingMatrix out;
  out.identity = identity;
  out.camera = camera;
  out.split = split;
  const nn::ForwardCtx<S> ctx = nn::eval_ctx<S>();
  const Index n = static_cast<Index>(images.size());
  for (Index start = 0; start < n; start += batch) {
    const Index b = std::min(batch, n - start);
    const Index c = images[0].channels, h = images[0].height, w = images[0].width;
    ArrayX<S> stack(b * c * h * w);
    for (Index i = 0; i < b; ++i) {
      const auto& img = images[static_cast<std::size_t>(start + i)];
      require(img.channels == c && img.height == h && img.width == w,
              "extract_embeddings: image sizes must be uniform");
      stack.segment(i * c * h * w, c * h * w) = img.data;
    }
    Var<S> x = Var<S>::leaf(Shape::nchw(b, c, h, w), std::move(stack), false);
    Var<S> emb = encoder.forward(x, ctx);
    if (out.rows.size() == 0) out.rows.resize(n, emb.shape()[1]);
    const Index d = emb.shape()[1];
    for (Index i = 0; i < b; ++i)
      for (Index j = 0; j < d; ++j)
        out.rows(start + i, j) = static_cast<double>(emb.value()[i * d + j]);
  }
  if (normalize) out.l2_normalize();
  return out;
}

// ---------------------------------------------------------------------------
// serialization

/// Text export: header lines, then one row per sample:
///   name identity camera v0 v1 ... v{dim-1}
inline void write_embeddings(const std::string& path,
                             const EmbeddingMatrix& emb) {
  emb.validate();
  std::ofstream f(path);
  require(f.good(), "write_embeddings: cannot open " + path);
  f << "# fdgan embeddings v1\n";
  f << "dim " << emb.dim() << "\n";
  f << "count " << emb.count() << "\n";
  f << "split " << (emb.split.empty() ? "unknown" : emb.split) << "\n";
  f << "unit_norm " << (emb.unit_norm ? 1 : 0) << "\n";
  char buf[64];
  for (Index i = 0; i < emb.count(); ++i) {
    const std::string name = emb.names.empty()
        ? "sample" + std::to_string(i)
        : emb.names[static_cast<std::size_t>(i)];
    f << name << ' ' << emb.identity[static_cast<std::size_t>(i)] << ' '
      << emb.camera[static_cast<std::size_t>(i)];
    for (Index j = 0; j < emb.dim(); ++j) {
      std::snprintf(buf, sizeof buf, " %.17g", emb.rows(i, j));
      f << buf;
    }
    f << '\n';
  }
  require(f.good(), "write_embeddings: write failed for " + path);
}

inline EmbeddingMatrix read_embeddings(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "read_embeddings: cannot open " + path);
  std::string line;
  require(std::getline(f, line) && line.rfind("# fdgan embeddings", 0) == 0,
          "read_embeddings: bad magic in " + path);
  Index dim = -1, count = -1;
  EmbeddingMatrix emb;
  std::string key;
  while (f >> key) {
    if (key == "dim") f >> dim;
    else if (key == "count") f >> count;
    else if (key == "split") f >> emb.split;
    else if (key == "unit_norm") { int u; f >> u; emb.unit_norm = u != 0; break; }
    else throw config_error("read_embeddings: unknown header key " + key);
  }
  require(dim >= 1 && count >= 1, "read_embeddings: missing dim/count header");
  emb.rows.resize(count, dim);
  for (Index i = 0; i < count; ++i) {
    std::string name;
    int id = 0, cam = 0;
    require(static_cast<bool>(f >> name >> id >> cam),
            "read_embeddings: truncated row " + std::to_string(i));
    emb.names.push_back(name);
    emb.identity.push_back(id);
    emb.camera.push_back(cam);
    for (Index j = 0; j < dim; ++j)
      require(static_cast<bool>(f >> emb.rows(i, j)),
              "read_embeddings: truncated values at row " + std::to_string(i));
  }
  emb.validate();
  return emb;
}

/// Human-readable result table.
inline std::string format_report(const EvalReport& rep) {
  std::ostringstream os;
  char buf[96];
  std::snprintf(buf, sizeof buf, "mAP     %.4f\n", rep.map);
  os << buf;
  const int ks[4] = {1, 5, 10, 20};
  for (int k : ks)
    if (k <= static_cast<int>(rep.cmc.size())) {
      std::snprintf(buf, sizeof buf, "top-%-3d %.4f\n", k, rep.top_k(k));
      os << buf;
    }
  os << "queries " << rep.n_valid_query << "/" << rep.n_query
     << " valid, gallery " << rep.n_gallery << "\n";
  if (!rep.skipped_queries.empty())
    os << "skipped " << rep.skipped_queries.size()
       << " queries with no valid match\n";
  os << "ties    " << rep.tie_count << "\n";
  os << "protocol: " << rep.protocol << "\n";
  return os.str();
}

}  // namespace fdgan::eval

#pragma once

// BEAM-like route-change scorer: per-AS role embeddings, DTW path
// difference and a windowed mean + k*std threshold.

#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "bgpoison/core.hpp"
#include "bgpoison/random.hpp"
#include "bgpoison/topology.hpp"

namespace bgpoison {

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

struct EmbeddingParams {
  int dim = 64;
  double learning_rate = 0.05;
  double margin = 0.1;
  int epochs = 50;
  int negatives = 5;
  double lambda = 1.0;
  /// Squared distance at which the proximity logits cross zero.
  double radius = 1.0;
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(int dim, double lambda) : dim_(dim), lambda_(lambda) {
    if (dim < 1) throw std::invalid_argument("embedding dimension must be positive");
  }

  int dim() const noexcept { return dim_; }
  double lambda() const noexcept { return lambda_; }
  std::size_t size() const noexcept { return asns_.size(); }
  const std::vector<Asn>& asns() const noexcept { return asns_; }

  /// Appends an AS; ASNs must be added in increasing order.
  void add(Asn asn, const std::vector<double>& vec, double hierarchy) {
    if (static_cast<int>(vec.size()) != dim_) throw std::invalid_argument("vector width mismatch");
    if (!asns_.empty() && !(asns_.back() < asn)) throw std::invalid_argument("ASNs must be added in increasing order");
    for (const double x : vec) {
      if (!std::isfinite(x)) throw std::invalid_argument("non-finite embedding entry");
    }
    if (!std::isfinite(hierarchy)) throw std::invalid_argument("non-finite hierarchy value");
    asns_.push_back(asn);
    data_.insert(data_.end(), vec.begin(), vec.end());
    hier_.push_back(hierarchy);
  }

  std::optional<std::size_t> find(Asn asn) const {
    const auto it = std::lower_bound(asns_.begin(), asns_.end(), asn);
    if (it == asns_.end() || *it != asn) return std::nullopt;
    return static_cast<std::size_t>(it - asns_.begin());
  }

  std::size_t index(Asn asn) const {
    const auto i = find(asn);
    if (!i) throw NotFoundError("AS " + to_string(asn) + " has no embedding");
    return *i;
  }

  bool contains(Asn asn) const { return find(asn).has_value(); }

  const double* vec(std::size_t i) const { return data_.data() + i * static_cast<std::size_t>(dim_); }
  double* vec(std::size_t i) { return data_.data() + i * static_cast<std::size_t>(dim_); }
  std::vector<double> vector_of(Asn asn) const {
    const auto i = index(asn);
    return {vec(i), vec(i) + dim_};
  }
  double hierarchy(Asn asn) const { return hier_[index(asn)]; }
  double& hierarchy_at(std::size_t i) { return hier_[i]; }
  double hierarchy_at(std::size_t i) const { return hier_[i]; }

  /// ||x_i - x_j|| + lambda * |h_i - h_j|
  double distance(std::size_t i, std::size_t j) const {
    const double* a = vec(i);
    const double* b = vec(j);
    double s = 0;
    for (int k = 0; k < dim_; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s) + lambda_ * std::abs(hier_[i] - hier_[j]);
  }

  /// Copy with every vector and hierarchy value multiplied by `c`.
  EmbeddingTable scaled(double c) const {
    EmbeddingTable out = *this;
    for (auto& x : out.data_) x *= c;
    for (auto& h : out.hier_) h *= c;
    return out;
  }

  void write(std::ostream& out) const {
    out << dim_ << ' ' << detail::format_double(lambda_) << '\n';
    for (std::size_t i = 0; i < asns_.size(); ++i) {
      out << asns_[i];
      for (int k = 0; k < dim_; ++k) out << ' ' << detail::format_double(vec(i)[k]);
      out << ' ' << detail::format_double(hier_[i]) << '\n';
    }
  }

  std::string serialize() const {
    std::ostringstream ss;
    write(ss);
    return ss.str();
  }

  static EmbeddingTable read(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::optional<EmbeddingTable> table;
    while (std::getline(in, line)) {
      ++lineno;
      const auto text = detail::trim(line);
      if (text.empty() || text.front() == '#') continue;
      std::istringstream ls{std::string(text)};
      if (!table) {
        int d = 0;
        double lambda = 0;
        if (!(ls >> d >> lambda) || d < 1) throw ParseError(lineno, "expected header 'd lambda'");
        table.emplace(d, lambda);
        continue;
      }
      std::string tok;
      ls >> tok;
      const Asn asn = parse_asn(tok);
      std::vector<double> v(static_cast<std::size_t>(table->dim_));
      for (auto& x : v) {
        if (!(ls >> x)) throw ParseError(lineno, "short embedding row");
      }
      double h = 0;
      if (!(ls >> h)) throw ParseError(lineno, "missing hierarchy value");
      if (ls >> tok) throw ParseError(lineno, "trailing data in embedding row");
      try {
        table->add(asn, v, h);
      } catch (const std::invalid_argument& e) {
        throw ParseError(lineno, e.what());
      }
    }
    if (!table) throw ParseError(lineno, "missing header");
    return *table;
  }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  int dim_ = 0;
  double lambda_ = 1.0;
  std::vector<Asn> asns_;
  std::vector<double> data_;
  std::vector<double> hier_;
};

struct EmbeddingReport {
  double final_loss = 0;
  double hierarchy_satisfied = 0;  ///< fraction of provider-customer edges with h(p) >= h(c) + margin
};

namespace detail {

inline double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

inline double softplus(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }

inline double squared_distance(const double* a, const double* b, int d) {
  double s = 0;
  for (int k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

/// One SGD step on -log sigmoid(sign * (radius - d^2)).
inline double proximity_step(double* a, double* b, int d, double radius, double sign, double lr) {
  const double s = sign * (radius - squared_distance(a, b, d));
  const double g = (1.0 - sigmoid(s)) * 2.0 * sign;  // d(loss)/d(d^2) scaled
  for (int k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    a[k] -= lr * g * diff;
    b[k] += lr * g * diff;
  }
  return softplus(-s);
}

}  // namespace detail

/// Trains embeddings by SGD on a proximity objective (edges and
/// shared-neighbor pairs pulled inside `radius`, random non-adjacent pairs
/// pushed outside) plus a hinge h(p) >= h(c) + margin on provider-customer
/// edges. Single-threaded and deterministic for a given seed.
inline EmbeddingTable train_embedding(const AsGraph& graph, const EmbeddingParams& params, std::uint64_t seed,
                                      EmbeddingReport* report = nullptr) {
  if (graph.size() == 0) throw TrainingError("cannot embed an empty graph");
  if (params.dim < 2) throw TrainingError("embedding dimension must be at least 2");
  if (params.epochs < 0 || params.negatives < 0) throw TrainingError("epochs and negatives must be non-negative");
  const auto n = graph.size();
  const int d = params.dim;
  Rng rng(derive_seed(seed, "beam-embedding"));
  EmbeddingTable table(d, params.lambda);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::uint32_t i = 0; i < n; ++i) {
    std::vector<double> v(static_cast<std::size_t>(d));
    for (auto& x : v) x = (uniform01(rng) - 0.5) * scale;
    table.add(graph.asn_at(i), v, 0.0);
  }
  struct Pair {
    std::uint32_t a, b;
  };
  std::vector<Pair> edges;
  std::vector<Pair> p2c;  // provider, customer
  for (std::uint32_t i = 0; i < n; ++i) {
    for (const auto c : graph.customers_of(i)) {
      edges.push_back({i, c});
      p2c.push_back({i, c});
    }
    for (const auto p : graph.peers_of(i)) {
      if (i < p) edges.push_back({i, p});
    }
  }
  std::vector<std::vector<std::uint32_t>> nbrs(n);
  for (const auto& e : edges) {
    nbrs[e.a].push_back(e.b);
    nbrs[e.b].push_back(e.a);
  }
  for (auto& v : nbrs) std::sort(v.begin(), v.end());
  auto adjacent = [&](std::uint32_t a, std::uint32_t b) {
    return std::binary_search(nbrs[a].begin(), nbrs[a].end(), b);
  };

  double loss = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    loss = 0;
    shuffle(edges, rng);
    for (const auto& e : edges) {
      loss += detail::proximity_step(table.vec(e.a), table.vec(e.b), d, params.radius, 1.0, params.learning_rate);
      // second-order pair through the shared neighbor e.b
      const auto& nb = nbrs[e.b];
      if (nb.size() > 1) {
        const auto x = nb[uniform_index(rng, nb.size())];
        if (x != e.a) {
          loss += detail::proximity_step(table.vec(e.a), table.vec(x), d, params.radius, 1.0, params.learning_rate);
        }
      }
      for (int k = 0; k < params.negatives; ++k) {
        const auto z = static_cast<std::uint32_t>(uniform_index(rng, n));
        if (z == e.a || adjacent(e.a, z)) continue;
        loss += detail::proximity_step(table.vec(e.a), table.vec(z), d, params.radius, -1.0, params.learning_rate);
      }
    }
    shuffle(p2c, rng);
    for (const auto& e : p2c) {
      const double gap = params.margin + table.hierarchy_at(e.b) - table.hierarchy_at(e.a);
      if (gap > 0) {
        loss += gap;
        table.hierarchy_at(e.a) += params.learning_rate;
        table.hierarchy_at(e.b) -= params.learning_rate;
      }
    }
  }
  if (!std::isfinite(loss)) throw TrainingError("embedding loss diverged");
  if (report) {
    std::size_t ok = 0;
    for (const auto& e : p2c) ok += table.hierarchy_at(e.a) >= table.hierarchy_at(e.b) + params.margin - 1e-12 ? 1 : 0;
    report->final_loss = loss;
    report->hierarchy_satisfied = p2c.empty() ? 1.0 : static_cast<double>(ok) / static_cast<double>(p2c.size());
  }
  return table;
}

inline double role_difference(const EmbeddingTable& emb, Asn u, Asn v) {
  return emb.distance(emb.index(u), emb.index(v));
}

// ---------------------------------------------------------------------------
// Route changes and DTW
// ---------------------------------------------------------------------------

struct RouteChange {
  Prefix prefix;
  AsPath old_path;
  AsPath new_path;
  std::int64_t time = 0;

  friend bool operator==(const RouteChange&, const RouteChange&) = default;
};

/// Boundary-anchored DTW over a local cost matrix (rows x cols).
template <class Cost>
double dtw(std::size_t rows, std::size_t cols, Cost&& cost) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(cols, inf), cur(cols, inf);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double best;
      if (i == 0 && j == 0) {
        best = 0;
      } else {
        best = inf;
        if (i > 0) best = std::min(best, prev[j]);
        if (j > 0) best = std::min(best, cur[j - 1]);
        if (i > 0 && j > 0) best = std::min(best, prev[j - 1]);
      }
      cur[j] = best + cost(i, j);
    }
    std::swap(prev, cur);
  }
  return prev[cols - 1];
}

/// DTW of the two paths under role_difference, divided by the longer length.
inline double path_difference(const EmbeddingTable& emb, const AsPath& old_path, const AsPath& new_path) {
  if (old_path.empty() || new_path.empty()) throw InvalidChangeError("route change with an empty path");
  std::vector<std::size_t> a, b;
  for (const auto x : old_path) a.push_back(emb.index(x));
  for (const auto x : new_path) b.push_back(emb.index(x));
  const double total = dtw(a.size(), b.size(), [&](std::size_t i, std::size_t j) { return emb.distance(a[i], b[j]); });
  return total / static_cast<double>(std::max(a.size(), b.size()));
}

inline double path_difference(const EmbeddingTable& emb, const RouteChange& change) {
  return path_difference(emb, change.old_path, change.new_path);
}

// ---------------------------------------------------------------------------
// Dynamic threshold
// ---------------------------------------------------------------------------

struct ThresholdConfig {
  std::int64_t window_seconds = 3600;
  double k = 3.0;
  /// Whether flagged scores join the window.
  bool include_flagged = false;
};

/// mean + k * population std, computed in two passes.
inline double threshold_of(const std::vector<double>& scores, double k) {
  if (scores.empty()) throw std::invalid_argument("threshold of an empty window");
  long double sum = 0;
  for (const double s : scores) sum += s;
  const long double mean = sum / static_cast<long double>(scores.size());
  long double var = 0;
  for (const double s : scores) var += (s - mean) * (s - mean);
  var /= static_cast<long double>(scores.size());
  return static_cast<double>(mean + static_cast<long double>(k) * std::sqrt(var));
}

/// Scores of the current window plus the threshold computed at the last
/// boundary. Windows are aligned to multiples of window_seconds.
struct ThresholdState {
  ThresholdConfig config;
  std::optional<std::int64_t> window_start;
  std::vector<std::pair<std::int64_t, double>> scores;
  std::optional<double> theta;

  ThresholdState() = default;
  explicit ThresholdState(ThresholdConfig c) : config(c) {
    if (c.window_seconds <= 0) throw std::invalid_argument("window_seconds must be positive");
  }

  std::int64_t align(std::int64_t t) const {
    const auto w = config.window_seconds;
    return (t >= 0 ? t / w : (t - w + 1) / w) * w;
  }

  bool initialized() const noexcept { return theta.has_value(); }

  std::vector<double> window_scores() const {
    std::vector<double> out;
    for (const auto& [_, s] : scores) out.push_back(s);
    return out;
  }
};

/// Crosses every window boundary up to `now`: the first crossing sets theta
/// from the closing window's scores (left unchanged when it is empty) and
/// older scores are pruned.
inline void update_threshold(ThresholdState& state, std::int64_t now) {
  const auto start = state.align(now);
  if (!state.window_start) {
    state.window_start = start;
    return;
  }
  if (now < *state.window_start) throw std::invalid_argument("threshold state cannot move backwards in time");
  if (start == *state.window_start) return;
  const auto closing_end = *state.window_start + state.config.window_seconds;
  std::vector<double> closing;
  for (const auto& [t, s] : state.scores) {
    if (t >= *state.window_start && t < closing_end) closing.push_back(s);
  }
  if (!closing.empty()) state.theta = threshold_of(closing, state.config.k);
  std::erase_if(state.scores, [&](const auto& e) { return e.first < start; });
  state.window_start = start;
}

struct Detection {
  double score = 0;
  bool flagged = false;
  std::optional<double> theta;  ///< threshold the score was compared with
};

/// Scores the change, compares it with the current threshold (nothing is
/// flagged before the first threshold exists) and records the score.
inline Detection detect_change(const EmbeddingTable& emb, ThresholdState& state, const RouteChange& change) {
  update_threshold(state, change.time);
  Detection d;
  d.score = path_difference(emb, change);
  d.theta = state.theta;
  d.flagged = state.theta && d.score > *state.theta;
  if (!d.flagged || state.config.include_flagged) state.scores.emplace_back(change.time, d.score);
  return d;
}

/// CSV score log: time,prefix,score,theta,flagged
inline void write_score_log_header(std::ostream& out) { out << "time,prefix,score,theta,flagged\n"; }

inline void write_score_log_row(std::ostream& out, const RouteChange& c, const Detection& d) {
  out << c.time << ',' << c.prefix << ',' << detail::format_double(d.score) << ','
      << (d.theta ? detail::format_double(*d.theta) : std::string{}) << ',' << (d.flagged ? 1 : 0) << '\n';
}

}  // namespace bgpoison

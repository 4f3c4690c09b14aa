#include "advlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advlab/error.hpp"
#include "advlab/textio.hpp"

namespace advlab {

void InputBox::validate() const {
  if (lo.empty() || hi.empty()) throw ConfigError("input_box: lo and hi must be non-empty");
  if (lo.size() != hi.size() && lo.size() != 1 && hi.size() != 1) {
    throw ConfigError("input_box: lo and hi lengths differ: " + std::to_string(lo.size()) +
                      " vs " + std::to_string(hi.size()));
  }
  const size_t n = std::max(lo.size(), hi.size());
  for (size_t i = 0; i < n; ++i) {
    const double l = lo.size() == 1 ? lo[0] : lo[i];
    const double h = hi.size() == 1 ? hi[0] : hi[i];
    if (!(l <= h)) {
      throw ConfigError("input_box: lo > hi at feature " + std::to_string(i));
    }
  }
}

void ToyConfig::validate() const {
  if (n_per_class < 1) throw ConfigError("data.n_per_class must be >= 1, got " + std::to_string(n_per_class));
  if (!(sigma > 0.0)) throw ConfigError("data.sigma must be > 0");
  if (!(rho1 < rho2)) throw ConfigError("data.rho1 must be < data.rho2");
  if (!(alpha1 <= beta1)) throw ConfigError("data.alpha1 must be <= data.beta1");
  if (!(alpha2 <= beta2)) throw ConfigError("data.alpha2 must be <= data.beta2");
}

LabeledDataset generate_toy(const ToyConfig& cfg) {
  cfg.validate();
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  const int n = cfg.n_per_class;
  Rng rng(cfg.seed);
  std::vector<double> feat;
  feat.reserve(static_cast<size_t>(2 * n) * 3);
  std::vector<int> labels;
  labels.reserve(static_cast<size_t>(2 * n));
  const double rhos[2] = {cfg.rho1, cfg.rho2};
  const double alphas[2] = {cfg.alpha1, cfg.alpha2};
  const double betas[2] = {cfg.beta1, cfg.beta2};
  for (int cls = 0; cls < 2; ++cls) {
    for (int i = 0; i < n; ++i) {
      const double z = rng.uniform(0.0, kTwoPi);
      const auto [g1, g2] = rng.normal_pair();
      const double x1 = rhos[cls] * std::cos(z) + cfg.sigma * g1;
      const double x2 = rhos[cls] * std::sin(z) + cfg.sigma * g2;
      const double x3 = rng.uniform(alphas[cls], betas[cls]);
      feat.insert(feat.end(), {x1, x2, x3});
      labels.push_back(cls);
    }
  }
  LabeledDataset ds;
  ds.features = Tensor(Shape{2 * n, 3}, std::move(feat));
  ds.labels = std::move(labels);
  ds.num_classes = 2;
  return ds;
}

namespace {

// True when every field of the line parses as a number; the first line of a
// CSV is taken as a header exactly when this fails.
bool all_numeric(const std::vector<std::string_view>& fields) {
  double ignored;
  for (const auto& f : fields) {
    if (!parse_double(f, ignored)) return false;
  }
  return true;
}

}  // namespace

LabeledDataset load_csv(const std::string& path, const CsvSchema& schema) {
  const std::string content = read_text_file(path);

  std::vector<std::string_view> lines;
  {
    std::string_view rest(content);
    while (!rest.empty()) {
      const size_t pos = rest.find('\n');
      std::string_view line = pos == std::string_view::npos ? rest : rest.substr(0, pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
  }
  if (lines.empty()) throw ParseError("empty dataset: " + path);

  size_t first_data = 0;
  if (!all_numeric(split_fields(lines[0], ','))) first_data = 1;
  if (first_data >= lines.size()) throw ParseError("empty dataset: " + path);

  const size_t ncols = split_fields(lines[first_data], ',').size();
  if (ncols < 2) {
    throw ParseError(path + ":" + std::to_string(first_data + 1) +
                     ": need at least one feature column and a label column");
  }
  const int d = static_cast<int>(ncols) - 1;
  if (schema.feature_dim && *schema.feature_dim != d) {
    throw SchemaError(path + ": expected " + std::to_string(*schema.feature_dim) +
                      " feature columns, found " + std::to_string(d));
  }

  std::vector<double> feat;
  std::vector<int> labels;
  int max_label = -1;
  for (size_t li = first_data; li < lines.size(); ++li) {
    const std::string lineno = std::to_string(li + 1);
    if (lines[li].empty()) {
      throw ParseError(path + ":" + lineno + ": empty row");
    }
    const auto fields = split_fields(lines[li], ',');
    if (fields.size() != ncols) {
      throw ParseError(path + ":" + lineno + ": expected " + std::to_string(ncols) +
                       " fields, got " + std::to_string(fields.size()));
    }
    for (int j = 0; j < d; ++j) {
      double v;
      if (!parse_double(fields[static_cast<size_t>(j)], v)) {
        throw ParseError(path + ":" + lineno + ": cannot parse '" +
                         std::string(fields[static_cast<size_t>(j)]) + "' as a number");
      }
      feat.push_back(v);
    }
    long long label;
    if (!parse_int(fields.back(), label)) {
      throw SchemaError(path + ":" + lineno + ": label must be an integer, got '" +
                        std::string(fields.back()) + "'");
    }
    if (label < 0) {
      throw SchemaError(path + ":" + lineno + ": label must be >= 0, got " +
                        std::to_string(label));
    }
    labels.push_back(static_cast<int>(label));
    max_label = std::max(max_label, static_cast<int>(label));
  }

  LabeledDataset ds;
  ds.features = Tensor(Shape{static_cast<int>(labels.size()), d}, std::move(feat));
  ds.labels = std::move(labels);
  ds.num_classes = max_label + 1;
  return ds;
}

void save_csv(const LabeledDataset& ds, const std::string& path) {
  const int n = ds.size(), d = ds.dim();
  std::string out;
  out.reserve(static_cast<size_t>(n) * (static_cast<size_t>(d) + 1) * 20);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      out += format_double(ds.features.data()[static_cast<size_t>(i) * d + j]);
      out += ',';
    }
    out += std::to_string(ds.labels[static_cast<size_t>(i)]);
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<Batch> batches(const LabeledDataset& ds, int batch_size, Rng& rng, bool shuffle) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1, got " + std::to_string(batch_size));
  const int n = ds.size(), d = ds.dim();
  if (n == 0) throw UsageError("batches: empty dataset");

  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (shuffle) {
    for (int i = n - 1; i >= 1; --i) {
      const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
  }

  std::vector<Batch> out;
  for (int start = 0; start < n; start += batch_size) {
    const int len = std::min(batch_size, n - start);
    std::vector<double> feat(static_cast<size_t>(len) * d);
    std::vector<int> labels(static_cast<size_t>(len));
    for (int r = 0; r < len; ++r) {
      const int src = idx[static_cast<size_t>(start + r)];
      for (int j = 0; j < d; ++j) {
        feat[static_cast<size_t>(r) * d + j] = ds.features.data()[static_cast<size_t>(src) * d + j];
      }
      labels[static_cast<size_t>(r)] = ds.labels[static_cast<size_t>(src)];
    }
    out.push_back(Batch{Tensor(Shape{len, d}, std::move(feat)), std::move(labels)});
  }
  return out;
}

}  // namespace advlab

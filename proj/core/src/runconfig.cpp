#include "moesim/runconfig.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace moesim {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + value +
                      "'");
  }
}

int64_t parse_i64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return static_cast<int64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + value +
                      "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return static_cast<uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" +
                      value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value +
                      "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + value +
                    "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_int(key, trim(tok)));
  return out;
}

std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = {
      {"epochs",
       [](RunConfig& c, const std::string& v) { c.train.epochs = parse_int("epochs", v); },
       [](const RunConfig& c) { return std::to_string(c.train.epochs); }},
      {"batch_size",
       [](RunConfig& c, const std::string& v) {
         c.train.batch_size = parse_int("batch_size", v);
       },
       [](const RunConfig& c) { return std::to_string(c.train.batch_size); }},
      {"learning_rate",
       [](RunConfig& c, const std::string& v) {
         c.train.learning_rate = static_cast<float>(parse_double("learning_rate", v));
       },
       [](const RunConfig& c) { return format_double(c.train.learning_rate); }},
      {"seed",
       [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      {"eval_every",
       [](RunConfig& c, const std::string& v) {
         c.train.eval_every = parse_int("eval_every", v);
       },
       [](const RunConfig& c) { return std::to_string(c.train.eval_every); }},
      {"warmup_epochs",
       [](RunConfig& c, const std::string& v) {
         c.train.warmup_epochs = parse_int("warmup_epochs", v);
       },
       [](const RunConfig& c) { return std::to_string(c.train.warmup_epochs); }},
      {"patience",
       [](RunConfig& c, const std::string& v) {
         c.train.patience = parse_int("patience", v);
       },
       [](const RunConfig& c) { return std::to_string(c.train.patience); }},
      {"max_grad_norm",
       [](RunConfig& c, const std::string& v) {
         c.train.max_grad_norm = parse_double("max_grad_norm", v);
       },
       [](const RunConfig& c) { return format_double(c.train.max_grad_norm); }},

      {"model.input_dim",
       [](RunConfig& c, const std::string& v) {
         c.train.model.input_dim = parse_int("model.input_dim", v);
       },
       [](const RunConfig& c) { return std::to_string(c.train.model.input_dim); }},
      {"model.latent_dim",
       [](RunConfig& c, const std::string& v) {
         c.train.model.latent_dim = parse_int("model.latent_dim", v);
       },
       [](const RunConfig& c) { return std::to_string(c.train.model.latent_dim); }},
      {"model.num_experts",
       [](RunConfig& c, const std::string& v) {
         c.train.model.num_experts = parse_int("model.num_experts", v);
       },
       [](const RunConfig& c) { return std::to_string(c.train.model.num_experts); }},
      {"model.encoder_hidden",
       [](RunConfig& c, const std::string& v) {
         c.train.model.encoder_hidden = parse_int_list("model.encoder_hidden", v);
       },
       [](const RunConfig& c) { return format_int_list(c.train.model.encoder_hidden); }},
      {"model.expert_hidden",
       [](RunConfig& c, const std::string& v) {
         c.train.model.expert_hidden = parse_int_list("model.expert_hidden", v);
       },
       [](const RunConfig& c) { return format_int_list(c.train.model.expert_hidden); }},
      {"model.clustering_hidden",
       [](RunConfig& c, const std::string& v) {
         c.train.model.clustering_hidden =
             parse_int_list("model.clustering_hidden", v);
       },
       [](const RunConfig& c) {
         return format_int_list(c.train.model.clustering_hidden);
       }},
      {"model.depict_dropout_rate",
       [](RunConfig& c, const std::string& v) {
         c.train.model.depict_dropout_rate =
             static_cast<float>(parse_double("model.depict_dropout_rate", v));
       },
       [](const RunConfig& c) { return format_double(c.train.model.depict_dropout_rate); }},
      {"model.pi1",
       [](RunConfig& c, const std::string& v) {
         c.train.model.pi1 = static_cast<float>(parse_double("model.pi1", v));
       },
       [](const RunConfig& c) { return format_double(c.train.model.pi1); }},
      {"model.pi2",
       [](RunConfig& c, const std::string& v) {
         c.train.model.pi2 = static_cast<float>(parse_double("model.pi2", v));
       },
       [](const RunConfig& c) { return format_double(c.train.model.pi2); }},
      {"model.soft_routing",
       [](RunConfig& c, const std::string& v) {
         c.train.model.soft_routing = parse_bool("model.soft_routing", v);
       },
       [](const RunConfig& c) { return c.train.model.soft_routing ? "true" : "false"; }},
      {"model.kl_soft_variance",
       [](RunConfig& c, const std::string& v) {
         c.train.model.kl_soft_variance = parse_bool("model.kl_soft_variance", v);
       },
       [](const RunConfig& c) {
         return c.train.model.kl_soft_variance ? "true" : "false";
       }},
      {"model.similarity_exclude_diagonal",
       [](RunConfig& c, const std::string& v) {
         c.train.model.similarity_exclude_diagonal =
             parse_bool("model.similarity_exclude_diagonal", v);
       },
       [](const RunConfig& c) {
         return c.train.model.similarity_exclude_diagonal ? "true" : "false";
       }},
      {"model.image_rows",
       [](RunConfig& c, const std::string& v) {
         c.train.model.image_rows = parse_int("model.image_rows", v);
       },
       [](const RunConfig& c) { return std::to_string(c.train.model.image_rows); }},
      {"model.image_cols",
       [](RunConfig& c, const std::string& v) {
         c.train.model.image_cols = parse_int("model.image_cols", v);
       },
       [](const RunConfig& c) { return std::to_string(c.train.model.image_cols); }},

      {"similarity.source",
       [](RunConfig& c, const std::string& v) {
         if (v == "raw_features")
           c.train.similarity.source = SimilaritySource::raw_features;
         else if (v == "precomputed_embedding")
           c.train.similarity.source = SimilaritySource::precomputed_embedding;
         else
           throw ConfigError(
               "config: similarity.source expects raw_features or "
               "precomputed_embedding, got '" +
               v + "'");
       },
       [](const RunConfig& c) {
         return c.train.similarity.source == SimilaritySource::raw_features
                    ? "raw_features"
                    : "precomputed_embedding";
       }},
      {"similarity.method",
       [](RunConfig& c, const std::string& v) {
         if (v == "knn")
           c.train.similarity.method = SimilarityMethod::knn;
         else if (v == "threshold")
           c.train.similarity.method = SimilarityMethod::threshold;
         else
           throw ConfigError("config: similarity.method expects knn or threshold, got '" +
                             v + "'");
       },
       [](const RunConfig& c) {
         return c.train.similarity.method == SimilarityMethod::knn ? "knn" : "threshold";
       }},
      {"similarity.k_neighbors",
       [](RunConfig& c, const std::string& v) {
         c.train.similarity.k_neighbors = parse_int("similarity.k_neighbors", v);
       },
       [](const RunConfig& c) { return std::to_string(c.train.similarity.k_neighbors); }},
      {"similarity.distance_threshold",
       [](RunConfig& c, const std::string& v) {
         c.train.similarity.distance_threshold =
             parse_double("similarity.distance_threshold", v);
       },
       [](const RunConfig& c) {
         return format_double(c.train.similarity.distance_threshold);
       }},
      {"similarity.metric",
       [](RunConfig& c, const std::string& v) { c.train.similarity.metric = v; },
       [](const RunConfig& c) { return c.train.similarity.metric; }},
      {"similarity.embedding_path",
       [](RunConfig& c, const std::string& v) { c.train.similarity.embedding_path = v; },
       [](const RunConfig& c) { return c.train.similarity.embedding_path; }},
      {"similarity.use_labels",
       [](RunConfig& c, const std::string& v) {
         c.train.similarity.use_labels = parse_bool("similarity.use_labels", v);
       },
       [](const RunConfig& c) { return c.train.similarity.use_labels ? "true" : "false"; }},

      {"data.format",
       [](RunConfig& c, const std::string& v) {
         if (v != "csv" && v != "idx")
           throw ConfigError("config: data.format expects csv or idx, got '" + v + "'");
         c.data.format = v;
       },
       [](const RunConfig& c) { return c.data.format; }},
      {"data.images",
       [](RunConfig& c, const std::string& v) { c.data.images = v; },
       [](const RunConfig& c) { return c.data.images; }},
      {"data.labels",
       [](RunConfig& c, const std::string& v) { c.data.labels = v; },
       [](const RunConfig& c) { return c.data.labels; }},
      {"data.path",
       [](RunConfig& c, const std::string& v) { c.data.path = v; },
       [](const RunConfig& c) { return c.data.path; }},
      {"data.label_column",
       [](RunConfig& c, const std::string& v) { c.data.label_column = v; },
       [](const RunConfig& c) { return c.data.label_column; }},
      {"data.arcsinh_cofactor",
       [](RunConfig& c, const std::string& v) {
         c.data.arcsinh_cofactor = parse_double("data.arcsinh_cofactor", v);
       },
       [](const RunConfig& c) { return format_double(c.data.arcsinh_cofactor); }},
      {"data.limit",
       [](RunConfig& c, const std::string& v) { c.data.limit = parse_i64("data.limit", v); },
       [](const RunConfig& c) { return std::to_string(c.data.limit); }},
  };
  return fields;
}

}  // namespace

void apply_kv(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& field : schema()) {
    if (key == field.key) {
      field.set(config, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file '" + path + "'");
  RunConfig config;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not 'key = value': '" + line + "'");
    apply_kv(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

void apply_overrides(RunConfig& config,
                     const std::vector<std::string>& key_value_pairs) {
  for (const auto& kv : key_value_pairs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_kv(config, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
}

std::map<std::string, std::string> materialize(const RunConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& field : schema()) out[field.key] = field.get(config);
  return out;
}

Dataset load_dataset(const DataConfig& data, const ScalingStats* reuse_stats) {
  Dataset ds;
  if (data.format == "idx") {
    if (data.images.empty()) throw ConfigError("config: data.images is required for idx");
    ds = load_idx(data.images, data.labels);
  } else if (data.format == "csv") {
    if (data.path.empty()) throw ConfigError("config: data.path is required for csv");
    CsvOptions opts;
    opts.label_column = data.label_column;
    opts.arcsinh_cofactor = data.arcsinh_cofactor;
    ds = reuse_stats ? load_csv(data.path, opts, *reuse_stats)
                     : load_csv(data.path, opts);
  } else {
    throw ConfigError("config: unsupported data.format '" + data.format + "'");
  }
  if (data.limit > 0) ds = take(ds, data.limit);
  return ds;
}

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "' for hashing");
  uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<uint8_t>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return hash;
}

DatasetFingerprint fingerprint_dataset(const std::string& path, uint64_t rows,
                                       uint64_t cols) {
  DatasetFingerprint fp;
  fp.path = path;
  fp.rows = rows;
  fp.cols = cols;
  std::ostringstream hex;
  hex << std::hex << fnv1a64_file(path);
  fp.content_hash = hex.str();
  return fp;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  nlohmann::json j;
  j["tool_version"] = manifest.tool_version;
  j["command"] = manifest.command;
  j["seed"] = manifest.seed;
  j["config"] = manifest.config;
  j["datasets"] = nlohmann::json::array();
  for (const auto& fp : manifest.datasets) {
    nlohmann::json d;
    d["path"] = fp.path;
    d["rows"] = fp.rows;
    d["cols"] = fp.cols;
    d["content_hash"] = fp.content_hash;
    j["datasets"].push_back(d);
  }
  j["outputs"] = manifest.outputs;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) throw FormatError("failed writing '" + path + "'");
}

}  // namespace moesim

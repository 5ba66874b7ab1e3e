#include "pmlda/io.hpp"

#include "pmlda/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace pmlda::io {

namespace {

std::ifstream open_in(const fs::path &path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in)
    throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path &path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string &token, const fs::path &path) {
  const std::string t = trim(token);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw IoError("'" + path.string() + "': cannot parse number '" + t + "'");
  return value;
}

Index parse_index(const std::string &token, const fs::path &path) {
  const std::string t = trim(token);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw IoError("'" + path.string() + "': cannot parse integer '" + t + "'");
  return static_cast<Index>(value);
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path &path) {
  auto in = open_in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#')
      continue;
    std::vector<std::string> fields;
    std::stringstream ss(t);
    std::string field;
    while (std::getline(ss, field, ','))
      fields.push_back(field);
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  return v;
}

struct RasterHeader {
  Index rows = 0;
  Index cols = 0;
  Index bands = 0;
  std::string dtype;
  fs::path data_file;
};

RasterHeader read_raster_header(const fs::path &path) {
  const KeyValues kv = read_key_values(path);
  auto get = [&](const std::string &key) {
    const auto it = kv.find(key);
    if (it == kv.end())
      throw IoError("'" + path.string() + "': header lacks '" + key + "'");
    return it->second;
  };
  RasterHeader h;
  h.rows = parse_index(get("rows"), path);
  h.cols = parse_index(get("cols"), path);
  h.bands = parse_index(get("bands"), path);
  h.dtype = kv.count("dtype") ? kv.at("dtype") : "float32";
  if (kv.count("layout") && kv.at("layout") != "bip" &&
      kv.at("layout") != "band-interleaved-by-pixel")
    throw IoError("'" + path.string() + "': only band-interleaved-by-pixel layout is supported");
  if (kv.count("byte_order") && kv.at("byte_order") != "little-endian")
    throw IoError("'" + path.string() + "': only little-endian payloads are supported");
  if (h.rows < 1 || h.cols < 1 || h.bands < 1)
    throw IoError("'" + path.string() + "': dimensions must be positive");
  const fs::path data = kv.count("data_file") ? fs::path(kv.at("data_file"))
                                              : path.filename().replace_extension(".raw");
  h.data_file = data.is_absolute() ? data : path.parent_path() / data;
  return h;
}

std::vector<std::uint32_t> read_words(const fs::path &path, std::size_t count) {
  auto in = open_in(path, std::ios::binary);
  std::vector<std::uint32_t> words(count);
  in.read(reinterpret_cast<char *>(words.data()),
          static_cast<std::streamsize>(count * sizeof(std::uint32_t)));
  if (in.gcount() != static_cast<std::streamsize>(count * sizeof(std::uint32_t)))
    throw IoError("'" + path.string() + "': payload shorter than the header declares");
  if (in.peek() != std::char_traits<char>::eof())
    throw IoError("'" + path.string() + "': payload longer than the header declares");
  for (auto &w : words)
    w = to_little_endian(w);
  return words;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd &m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index c = 0; c < m.cols(); ++c) {
    std::vector<double> col(m.col(c).data(), m.col(c).data() + m.rows());
    rows.push_back(col);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json &j, Index rows) {
  Eigen::MatrixXd m(rows, static_cast<Index>(j.size()));
  for (Index c = 0; c < m.cols(); ++c) {
    const auto col = j.at(static_cast<std::size_t>(c)).get<std::vector<double>>();
    if (static_cast<Index>(col.size()) != rows)
      throw IoError("truth record: ragged matrix");
    for (Index r = 0; r < rows; ++r)
      m(r, c) = col[static_cast<std::size_t>(r)];
  }
  return m;
}

} // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc())
    throw IoError("cannot format number");
  return std::string(buf, ptr);
}

KeyValues read_key_values(const fs::path &path) {
  auto in = open_in(path);
  KeyValues kv;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == '[')
      continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw IoError("'" + path.string() + "': expected key=value, got '" + t + "'");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

void write_key_values(const fs::path &path,
                      const std::vector<std::pair<std::string, std::string>> &entries) {
  auto out = open_out(path);
  for (const auto &[k, v] : entries)
    out << k << '=' << v << '\n';
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

void write_cube(const fs::path &header_path, const HyperspectralCube &cube) {
  fs::path raw = header_path;
  raw.replace_extension(".raw");
  write_key_values(header_path, {{"rows", std::to_string(cube.rows())},
                                 {"cols", std::to_string(cube.cols())},
                                 {"bands", std::to_string(cube.bands())},
                                 {"dtype", "float32"},
                                 {"layout", "bip"},
                                 {"byte_order", "little-endian"},
                                 {"data_file", raw.filename().string()}});

  const auto &x = cube.spectra();
  std::vector<std::uint32_t> words(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) {
    const auto f = static_cast<float>(x.data()[i]);
    words[static_cast<std::size_t>(i)] = to_little_endian(std::bit_cast<std::uint32_t>(f));
  }
  auto out = open_out(raw, std::ios::binary);
  out.write(reinterpret_cast<const char *>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (!out)
    throw IoError("write failed for '" + raw.string() + "'");
}

HyperspectralCube read_cube(const fs::path &path) {
  if (path.extension() == ".csv") {
    Index rows = -1, cols = -1;
    {
      auto in = open_in(path);
      std::string first;
      std::getline(in, first);
      if (trim(first).rfind('#', 0) == 0) {
        std::stringstream ss(trim(first).substr(1));
        std::string token;
        while (ss >> token) {
          const auto eq = token.find('=');
          if (eq == std::string::npos)
            continue;
          if (token.substr(0, eq) == "rows")
            rows = parse_index(token.substr(eq + 1), path);
          else if (token.substr(0, eq) == "cols")
            cols = parse_index(token.substr(eq + 1), path);
        }
      }
    }
    const Eigen::MatrixXd m = read_matrix_csv(path);
    if (rows < 0 || cols < 0) {
      rows = m.rows();
      cols = 1;
    }
    if (rows * cols != m.rows())
      throw IoError("'" + path.string() + "': pixel count does not match rows*cols");
    return HyperspectralCube(rows, cols, m.transpose());
  }

  const RasterHeader h = read_raster_header(path);
  if (h.dtype != "float32")
    throw IoError("'" + path.string() + "': cube dtype must be float32");
  const auto n = static_cast<std::size_t>(h.rows * h.cols * h.bands);
  const auto words = read_words(h.data_file, n);
  Eigen::MatrixXd spectra(h.bands, h.rows * h.cols);
  for (std::size_t i = 0; i < n; ++i)
    spectra.data()[i] = static_cast<double>(std::bit_cast<float>(words[i]));
  try {
    return HyperspectralCube(h.rows, h.cols, std::move(spectra));
  } catch (const ValidationError &e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

void write_cube_csv(const fs::path &path, const HyperspectralCube &cube) {
  auto out = open_out(path);
  out << "# rows=" << cube.rows() << " cols=" << cube.cols() << '\n';
  for (Index n = 0; n < cube.pixel_count(); ++n) {
    for (Index b = 0; b < cube.bands(); ++b)
      out << (b ? "," : "") << format_double(cube.spectra()(b, n));
    out << '\n';
  }
}

namespace {

void check_labels(const SegmentationMap &seg, const fs::path &path) {
  for (Index label : seg.labels)
    if (label < 0)
      throw IoError("'" + path.string() + "': negative segment label");
}

} // namespace

SegmentationMap read_segmentation(const fs::path &path) {
  SegmentationMap seg;
  if (path.extension() == ".csv" || path.extension() == ".txt") {
    const auto rows = read_csv_rows(path);
    if (rows.empty())
      throw IoError("'" + path.string() + "': empty segmentation");
    seg.rows = static_cast<Index>(rows.size());
    seg.cols = static_cast<Index>(rows.front().size());
    for (const auto &r : rows) {
      if (static_cast<Index>(r.size()) != seg.cols)
        throw IoError("'" + path.string() + "': ragged segmentation rows");
      for (const auto &f : r)
        seg.labels.push_back(parse_index(f, path));
    }
    check_labels(seg, path);
    return seg;
  }

  const RasterHeader h = read_raster_header(path);
  if (h.bands != 1)
    throw IoError("'" + path.string() + "': segmentation raster must have one band");
  const auto n = static_cast<std::size_t>(h.rows * h.cols);
  const auto words = read_words(h.data_file, n);
  seg.rows = h.rows;
  seg.cols = h.cols;
  seg.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (h.dtype == "int32") {
      seg.labels[i] = static_cast<Index>(std::bit_cast<std::int32_t>(words[i]));
    } else if (h.dtype == "float32") {
      const float f = std::bit_cast<float>(words[i]);
      if (f != std::floor(f))
        throw IoError("'" + path.string() + "': non-integer label");
      seg.labels[i] = static_cast<Index>(f);
    } else {
      throw IoError("'" + path.string() + "': segmentation dtype must be int32 or float32");
    }
  }
  check_labels(seg, path);
  return seg;
}

void write_segmentation_csv(const fs::path &path, const SegmentationMap &seg) {
  auto out = open_out(path);
  for (Index r = 0; r < seg.rows; ++r) {
    for (Index c = 0; c < seg.cols; ++c)
      out << (c ? "," : "") << seg.labels[static_cast<std::size_t>(r * seg.cols + c)];
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const fs::path &path) {
  const auto rows = read_csv_rows(path);
  if (rows.empty())
    throw IoError("'" + path.string() + "': no data rows");
  const auto width = rows.front().size();
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width)
      throw IoError("'" + path.string() + "': ragged rows");
    for (std::size_t c = 0; c < width; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = parse_double(rows[r][c], path);
  }
  return m;
}

void write_matrix_csv(const fs::path &path, const Eigen::MatrixXd &matrix) {
  auto out = open_out(path);
  for (Index r = 0; r < matrix.rows(); ++r) {
    for (Index c = 0; c < matrix.cols(); ++c)
      out << (c ? "," : "") << format_double(matrix(r, c));
    out << '\n';
  }
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

Eigen::MatrixXd read_endmember_csv(const fs::path &path) {
  return read_matrix_csv(path).transpose();
}

void write_endmember_csv(const fs::path &path, const Eigen::MatrixXd &means) {
  write_matrix_csv(path, means.transpose());
}

void write_pgm(const fs::path &path, Index rows, Index cols, const Eigen::VectorXd &values) {
  if (values.size() != rows * cols)
    throw ValidationError("PGM values do not match rows*cols");
  auto out = open_out(path, std::ios::binary);
  out << "P5\n" << cols << ' ' << rows << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(values.size()));
  for (Index i = 0; i < values.size(); ++i)
    bytes[static_cast<std::size_t>(i)] =
        static_cast<unsigned char>(std::lround(255.0 * std::clamp(values[i], 0.0, 1.0)));
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

void write_truth(const fs::path &path, const TruthRecord &truth) {
  nlohmann::json j;
  j["rows"] = truth.rows;
  j["cols"] = truth.cols;
  j["bands"] = truth.model.bands();
  j["K"] = truth.model.topics();
  j["mixing"] = to_string(truth.mixing);
  j["alpha"] = truth.alpha;
  j["lambda"] = truth.lambda;
  j["seed"] = truth.seed;
  j["sigma2"] = truth.model.sigma2;
  if (truth.model.per_topic_sigma2) {
    const auto &v = *truth.model.per_topic_sigma2;
    j["per_topic_sigma2"] = std::vector<double>(v.data(), v.data() + v.size());
  }
  j["means"] = matrix_to_json(truth.model.means);
  j["labels"] = truth.layout.labels;
  nlohmann::json docs = nlohmann::json::array();
  for (std::size_t d = 0; d < truth.pi.size(); ++d) {
    const auto &w = truth.pi[d].weights();
    docs.push_back({{"pi", std::vector<double>(w.data(), w.data() + w.size())},
                    {"s", truth.s[d]}});
  }
  j["documents"] = docs;
  j["proportions"] = matrix_to_json(truth.proportions);
  j["pure_pixels"] = truth.pure_pixel_index;

  auto out = open_out(path);
  out << j.dump(1) << '\n';
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

TruthRecord read_truth(const fs::path &path) {
  auto in = open_in(path);
  nlohmann::json j;
  try {
    in >> j;
    TruthRecord t;
    t.rows = j.at("rows").get<Index>();
    t.cols = j.at("cols").get<Index>();
    const auto bands = j.at("bands").get<Index>();
    const auto K = j.at("K").get<Index>();
    t.mixing = parse_mixing_model(j.at("mixing").get<std::string>());
    t.alpha = j.at("alpha").get<double>();
    t.lambda = j.at("lambda").get<double>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.model.sigma2 = j.at("sigma2").get<double>();
    if (j.contains("per_topic_sigma2")) {
      const auto v = j.at("per_topic_sigma2").get<std::vector<double>>();
      t.model.per_topic_sigma2 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
    }
    t.model.means = matrix_from_json(j.at("means"), bands);
    if (t.model.topics() != K)
      throw IoError("truth record: K does not match the means");
    t.layout.rows = t.rows;
    t.layout.cols = t.cols;
    t.layout.labels = j.at("labels").get<std::vector<Index>>();
    for (const auto &doc : j.at("documents")) {
      const auto pi = doc.at("pi").get<std::vector<double>>();
      t.pi.emplace_back(Eigen::Map<const Eigen::VectorXd>(pi.data(), static_cast<Index>(pi.size())));
      t.s.push_back(doc.at("s").get<double>());
    }
    t.proportions = matrix_from_json(j.at("proportions"), K);
    t.pure_pixel_index = j.at("pure_pixels").get<std::vector<Index>>();
    return t;
  } catch (const nlohmann::json::exception &e) {
    throw IoError("'" + path.string() + "': malformed truth record: " + e.what());
  } catch (const ValidationError &e) {
    throw IoError("'" + path.string() + "': invalid truth record: " + e.what());
  }
}

} // namespace pmlda::io

#include "histo/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "histo/digest.hpp"
#include "histo/image_io.hpp"
#include "histo/nn/tensor_store.hpp"

namespace fs = std::filesystem;

namespace histo::service {

// ---------------------------------------------------------------------------
// Configuration

ServiceConfig ServiceConfig::load(const fs::path& file) {
  ServiceConfig cfg;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + file.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
    }
    cfg.listen_host = j.value("listen_host", cfg.listen_host);
    cfg.listen_port = j.value("listen_port", cfg.listen_port);
    cfg.model_path = j.value("model_path", cfg.model_path);
    cfg.tile_window = j.value("tile_window", cfg.tile_window);
    cfg.overlap = j.value("overlap", cfg.overlap);
    cfg.store_dir = j.value("store_dir", cfg.store_dir);
    cfg.max_upload_bytes = j.value("max_upload_bytes", cfg.max_upload_bytes);
    cfg.static_dir = j.value("static_dir", cfg.static_dir);
  }
  cfg.apply_environment();
  return cfg;
}

void ServiceConfig::apply_environment() {
  auto env = [](const char* key) -> std::optional<std::string> {
    if (const char* v = std::getenv(key); v && *v) return std::string(v);
    return std::nullopt;
  };
  try {
    if (auto v = env("HISTO_LISTEN_HOST")) listen_host = *v;
    if (auto v = env("HISTO_LISTEN_PORT")) listen_port = std::stoi(*v);
    if (auto v = env("HISTO_MODEL_PATH")) model_path = *v;
    if (auto v = env("HISTO_TILE_WINDOW")) tile_window = std::stoi(*v);
    if (auto v = env("HISTO_OVERLAP")) overlap = std::stod(*v);
    if (auto v = env("HISTO_STORE_DIR")) store_dir = *v;
    if (auto v = env("HISTO_MAX_UPLOAD_BYTES")) max_upload_bytes = std::stoull(*v);
    if (auto v = env("HISTO_STATIC_DIR")) static_dir = *v;
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad HISTO_* environment value: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Records

void to_json(nlohmann::json& j, const DiagnosisRecord& r) {
  nlohmann::json votes = nlohmann::json::object();
  for (ClassLabel c : kAllLabels) votes[std::string(label_name(c))] = r.vote_counts[index_of(c)];
  nlohmann::json patches = nlohmann::json::array();
  for (ClassLabel c : r.patch_labels) patches.push_back(std::string(label_name(c)));
  j = {{"record_id", r.record_id},
       {"created_at", r.created_at},
       {"patient_name", r.patient_name},
       {"birth_year", r.birth_year},
       {"image_hash", r.image_hash},
       {"predicted", std::string(label_name(r.predicted))},
       {"vote_counts", votes},
       {"patch_labels", patches},
       {"grid", {{"rows", r.grid_rows}, {"cols", r.grid_cols}}},
       {"model_id", r.model_id}};
}

namespace {

ClassLabel label_or_throw(const std::string& s) {
  const auto l = parse_label(s);
  if (!l) throw Error(ErrorCode::UnknownLabel, s);
  return *l;
}

}  // namespace

void from_json(const nlohmann::json& j, DiagnosisRecord& r) {
  j.at("record_id").get_to(r.record_id);
  j.at("created_at").get_to(r.created_at);
  j.at("patient_name").get_to(r.patient_name);
  j.at("birth_year").get_to(r.birth_year);
  j.at("image_hash").get_to(r.image_hash);
  r.predicted = label_or_throw(j.at("predicted").get<std::string>());
  for (ClassLabel c : kAllLabels) {
    r.vote_counts[index_of(c)] = j.at("vote_counts").at(std::string(label_name(c))).get<int>();
  }
  r.patch_labels.clear();
  for (const auto& p : j.at("patch_labels")) r.patch_labels.push_back(label_or_throw(p.get<std::string>()));
  j.at("grid").at("rows").get_to(r.grid_rows);
  j.at("grid").at("cols").get_to(r.grid_cols);
  j.at("model_id").get_to(r.model_id);
}

void to_json(nlohmann::json& j, const ModelInfo& m) {
  j = {{"model_id", m.model_id},
       {"input_resolution", m.input_resolution},
       {"num_classes", m.num_classes},
       {"weight_file_digest", m.weight_file_digest}};
  j["phi"] = m.phi ? nlohmann::json(*m.phi) : nlohmann::json(nullptr);
  j["variant"] = m.phi ? nlohmann::json("B" + std::to_string(static_cast<int>(*m.phi)))
                       : nlohmann::json(nullptr);
}

RecordStore::RecordStore(fs::path dir)
    : dir_(std::move(dir)), records_path_(dir_ / "records.jsonl"), blob_dir_(dir_ / "blobs") {
  std::error_code ec;
  fs::create_directories(blob_dir_, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create store " + dir_.string() + ": " + ec.message());
}

void RecordStore::append(const DiagnosisRecord& record) {
  const std::string line = nlohmann::json(record).dump() + "\n";
  std::lock_guard lock(append_mutex_);
  std::ofstream out(records_path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + records_path_.string());
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "append to " + records_path_.string() + " failed");
}

std::vector<DiagnosisRecord> RecordStore::load_all() const {
  std::vector<DiagnosisRecord> out;
  std::ifstream in(records_path_, std::ios::binary);
  if (!in) return out;
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::size_t start = 0;
  while (true) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) break;  // unterminated tail is an in-flight append
    const std::string_view line(text.data() + start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    out.push_back(nlohmann::json::parse(line).get<DiagnosisRecord>());
  }
  return out;
}

std::optional<DiagnosisRecord> RecordStore::find(const std::string& record_id) const {
  for (auto& r : load_all())
    if (r.record_id == record_id) return r;
  return std::nullopt;
}

fs::path RecordStore::blob_path(const std::string& digest) const { return blob_dir_ / digest; }

std::string RecordStore::put_blob(std::span<const std::uint8_t> bytes) {
  const std::string digest = sha256_hex(bytes);
  std::lock_guard lock(blob_mutex_);
  const fs::path path = blob_path(digest);
  if (!fs::exists(path)) write_file_atomic(path, bytes);
  return digest;
}

std::vector<std::uint8_t> RecordStore::get_blob(const std::string& digest) const {
  const fs::path path = blob_path(digest);
  if (!fs::exists(path)) throw Error(ErrorCode::NotFound, "blob " + digest);
  return read_file_bytes(path);
}

// ---------------------------------------------------------------------------
// Service

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto micros =
      std::chrono::duration_cast<std::chrono::microseconds>(now.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(micros / 1000000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<long long>(micros % 1000000));
  return buf;
}

int current_utc_year() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  return tm.tm_year + 1900;
}

std::string new_record_id() {
  static std::mutex mu;
  static std::mt19937_64 engine = [] {
    std::random_device rd;
    std::seed_seq seq{rd(), rd(), rd(), rd(),
                      static_cast<unsigned>(std::chrono::steady_clock::now().time_since_epoch().count())};
    return std::mt19937_64(seq);
  }();
  std::uint64_t hi, lo;
  {
    std::lock_guard lock(mu);
    hi = engine();
    lo = engine();
  }
  // UUID version 4 layout.
  hi = (hi & 0xFFFFFFFFFFFF0FFFULL) | 0x0000000000004000ULL;
  lo = (lo & 0x3FFFFFFFFFFFFFFFULL) | 0x8000000000000000ULL;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%08llx-%04llx-%04llx-%04llx-%012llx",
                static_cast<unsigned long long>(hi >> 32),
                static_cast<unsigned long long>((hi >> 16) & 0xFFFF),
                static_cast<unsigned long long>(hi & 0xFFFF),
                static_cast<unsigned long long>(lo >> 48),
                static_cast<unsigned long long>(lo & 0xFFFFFFFFFFFFULL));
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

constexpr std::size_t kMaxNameLength = 200;

std::string make_model_id(const nn::Model& model, const std::string& digest) {
  std::string base = "histo";
  const auto& info = model.info();
  if (info.contains("phi") && info["phi"].is_number()) {
    base = "efficientnet-b" + std::to_string(static_cast<int>(info["phi"].get<double>()));
  } else if (info.contains("family") && info["family"].is_string()) {
    base = info["family"].get<std::string>();
  }
  return base + "-r" + std::to_string(model.input_resolution()) + "-" + digest.substr(0, 12);
}

}  // namespace

DiagnosisService::DiagnosisService(ServiceConfig config)
    : config_(std::move(config)), store_(config_.store_dir) {
  tile_spec().stride();
  if (!config_.model_path.empty()) {
    model_ = std::make_shared<const nn::Model>(nn::load_model(config_.model_path));
    weight_digest_ = sha256_file(config_.model_path);
    model_id_ = make_model_id(*model_, weight_digest_);
  }
}

DiagnosisService::DiagnosisService(ServiceConfig config, nn::Model model, std::string weight_digest)
    : config_(std::move(config)),
      model_(std::make_shared<const nn::Model>(std::move(model))),
      weight_digest_(std::move(weight_digest)),
      store_(config_.store_dir) {
  tile_spec().stride();
  model_id_ = make_model_id(*model_, weight_digest_.empty() ? std::string(12, '0') : weight_digest_);
}

TileSpec DiagnosisService::tile_spec() const {
  return TileSpec{config_.tile_window, config_.overlap, false};
}

DiagnosisRecord DiagnosisService::diagnose(const std::string& patient_name,
                                           const std::string& birth_year,
                                           std::span<const std::uint8_t> image_bytes) {
  const std::string name = trim(patient_name);
  if (name.empty()) throw Error(ErrorCode::ValidationFailed, "patient_name is required");
  if (name.size() > kMaxNameLength) {
    throw Error(ErrorCode::ValidationFailed, "patient_name longer than 200 characters");
  }
  int year = 0;
  {
    const std::string y = trim(birth_year);
    std::size_t used = 0;
    try {
      year = std::stoi(y, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (y.empty() || used != y.size()) {
      throw Error(ErrorCode::ValidationFailed, "birth_year must be an integer");
    }
    if (year < 1900 || year > current_utc_year()) {
      throw Error(ErrorCode::ValidationFailed,
                  "birth_year must lie in [1900, " + std::to_string(current_utc_year()) + "]");
    }
  }
  if (image_bytes.size() > config_.max_upload_bytes) {
    throw Error(ErrorCode::ImageTooLarge, std::to_string(image_bytes.size()) + " bytes exceeds " +
                                              std::to_string(config_.max_upload_bytes));
  }
  if (!model_) throw Error(ErrorCode::ModelNotLoaded, "model not loaded");

  const Image image = decode_png(image_bytes);
  if (image.width() < config_.tile_window || image.height() < config_.tile_window) {
    throw Error(ErrorCode::ValidationFailed,
                "image " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                    " is smaller than the " + std::to_string(config_.tile_window) + " pixel window");
  }
  const ImageClassification result = classify_image(*model_, image, tile_spec());

  DiagnosisRecord record;
  record.record_id = new_record_id();
  record.created_at = utc_timestamp();
  record.patient_name = name;
  record.birth_year = year;
  record.image_hash = store_.put_blob(image_bytes);
  record.predicted = result.label;
  record.vote_counts = result.tally.counts;
  record.patch_labels = result.patch_labels;
  record.grid_rows = result.grid.rows;
  record.grid_cols = result.grid.cols;
  record.model_id = model_id_;
  store_.append(record);
  return record;
}

std::vector<DiagnosisRecord> DiagnosisService::list_records(int page, int page_size) const {
  if (page < 0 || page_size < 1) {
    throw Error(ErrorCode::ValidationFailed, "page must be >= 0 and page_size >= 1");
  }
  auto all = store_.load_all();
  std::stable_sort(all.begin(), all.end(), [](const DiagnosisRecord& a, const DiagnosisRecord& b) {
    return std::tie(a.created_at, a.record_id) > std::tie(b.created_at, b.record_id);
  });
  const std::size_t begin = static_cast<std::size_t>(page) * page_size;
  if (begin >= all.size()) return {};
  const std::size_t end = std::min(all.size(), begin + page_size);
  return {all.begin() + static_cast<std::ptrdiff_t>(begin), all.begin() + static_cast<std::ptrdiff_t>(end)};
}

DiagnosisRecord DiagnosisService::get_record(const std::string& record_id) const {
  auto r = store_.find(record_id);
  if (!r) throw Error(ErrorCode::NotFound, "no record " + record_id);
  return *r;
}

ModelInfo DiagnosisService::model_info() const {
  if (!model_) throw Error(ErrorCode::ModelNotLoaded, "model not loaded");
  ModelInfo info;
  info.model_id = model_id_;
  info.input_resolution = model_->input_resolution();
  info.num_classes = model_->num_classes();
  info.weight_file_digest = weight_digest_;
  const auto& meta = model_->info();
  if (meta.contains("phi") && meta["phi"].is_number()) info.phi = meta["phi"].get<double>();
  return info;
}

ImageClassification DiagnosisService::replay(const DiagnosisRecord& record) const {
  if (!model_) throw Error(ErrorCode::ModelNotLoaded, "model not loaded");
  const auto bytes = store_.get_blob(record.image_hash);
  return classify_image(*model_, decode_png(bytes), tile_spec());
}

// ---------------------------------------------------------------------------
// HTTP

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UndecodableImage:
    case ErrorCode::ValidationFailed:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ImageSmallerThanWindow:
      return 400;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::ImageTooLarge: return 413;
    case ErrorCode::ModelNotLoaded: return 503;
    default: return 500;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status_for(e.code()),
            {{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
}

template <class Fn>
auto guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "Internal"}, {"message", e.what()}});
    }
  };
}

int query_int(const httplib::Request& req, const char* key, int fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used == v.size()) return out;
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorCode::ValidationFailed, std::string(key) + " must be an integer");
}

}  // namespace

HttpServer::HttpServer(DiagnosisService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  // Let oversized uploads reach the handler so they get a structured 413.
  s.set_payload_max_length(service_.config().max_upload_bytes + (1u << 20));

  s.Get("/api/health", guarded([](const httplib::Request&, httplib::Response& res) {
          send_json(res, 200, {{"status", "ok"}});
        }));

  s.Get("/api/model", guarded([this](const httplib::Request&, httplib::Response& res) {
          send_json(res, 200, service_.model_info());
        }));

  s.Post("/api/diagnose", guarded([this](const httplib::Request& req, httplib::Response& res) {
           if (!req.is_multipart_form_data()) {
             throw Error(ErrorCode::ValidationFailed, "expected multipart/form-data");
           }
           auto field = [&](const char* key) {
             return req.has_file(key) ? req.get_file_value(key).content : std::string();
           };
           if (!req.has_file("image")) throw Error(ErrorCode::ValidationFailed, "image is required");
           const std::string image = field("image");
           const auto record = service_.diagnose(
               field("patient_name"), field("birth_year"),
               {reinterpret_cast<const std::uint8_t*>(image.data()), image.size()});
           send_json(res, 201, record);
         }));

  s.Get("/api/records", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto records =
              service_.list_records(query_int(req, "page", 0), query_int(req, "page_size", 20));
          send_json(res, 200, records);
        }));

  s.Get(R"(/api/records/([A-Za-z0-9\-]+))",
        guarded([this](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, service_.get_record(req.matches[1]));
        }));

  if (!service_.config().static_dir.empty()) {
    s.set_mount_point("/", service_.config().static_dir);
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

bool HttpServer::listen() { return server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace histo::service

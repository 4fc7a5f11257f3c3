#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histo/aggregate.hpp"
#include "histo/error.hpp"
#include "histo/labels.hpp"
#include "histo/nn/model.hpp"
#include "histo/tiler.hpp"

namespace httplib {
class Server;
}

namespace histo::service {

struct ServiceConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::string model_path;
  int tile_window = 512;
  double overlap = 0.5;
  std::string store_dir = "histo-store";
  std::size_t max_upload_bytes = 64u << 20;
  /// Directory of static UI assets served under "/"; empty disables it.
  std::string static_dir;

  /// Reads an optional JSON file, then applies HISTO_* environment overrides.
  static ServiceConfig load(const std::filesystem::path& file = {});
  void apply_environment();
};

struct DiagnosisRecord {
  std::string record_id;
  std::string created_at;  // UTC, ISO-8601 with microseconds
  std::string patient_name;
  int birth_year = 0;
  std::string image_hash;  // SHA-256 of the uploaded bytes
  ClassLabel predicted = ClassLabel::Normal;
  std::array<int, kNumClasses> vote_counts{};
  std::vector<ClassLabel> patch_labels;
  int grid_rows = 0;
  int grid_cols = 0;
  std::string model_id;

  friend bool operator==(const DiagnosisRecord&, const DiagnosisRecord&) = default;
};

void to_json(nlohmann::json& j, const DiagnosisRecord& r);
void from_json(const nlohmann::json& j, DiagnosisRecord& r);

/// Append-only JSON-lines record log plus a content-addressed blob directory.
/// Appends are serialized; readers only ever see complete lines.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path dir);

  void append(const DiagnosisRecord& record);

  /// File order (oldest first); a trailing partial line is ignored.
  std::vector<DiagnosisRecord> load_all() const;
  std::optional<DiagnosisRecord> find(const std::string& record_id) const;

  /// Stores bytes under their SHA-256 and returns the digest.
  std::string put_blob(std::span<const std::uint8_t> bytes);
  std::vector<std::uint8_t> get_blob(const std::string& digest) const;

  const std::filesystem::path& records_path() const noexcept { return records_path_; }
  std::filesystem::path blob_path(const std::string& digest) const;

 private:
  std::filesystem::path dir_;
  std::filesystem::path records_path_;
  std::filesystem::path blob_dir_;
  mutable std::mutex append_mutex_;
  mutable std::mutex blob_mutex_;
};

struct ModelInfo {
  std::string model_id;
  std::optional<double> phi;
  int input_resolution = 0;
  int num_classes = 0;
  std::string weight_file_digest;
};

void to_json(nlohmann::json& j, const ModelInfo& m);

/// Diagnosis workflow independent of HTTP. A single model is loaded for the
/// process lifetime and shared read-only across requests.
class DiagnosisService {
 public:
  /// Loads config.model_path when set; an empty path leaves the model unloaded.
  explicit DiagnosisService(ServiceConfig config);

  /// Uses an in-memory model; weight_digest identifies it in model_info.
  DiagnosisService(ServiceConfig config, nn::Model model, std::string weight_digest);

  bool model_loaded() const noexcept { return model_ != nullptr; }
  const ServiceConfig& config() const noexcept { return config_; }

  DiagnosisRecord diagnose(const std::string& patient_name, const std::string& birth_year,
                           std::span<const std::uint8_t> image_bytes);

  /// Newest first by (created_at, record_id); page is zero-based.
  std::vector<DiagnosisRecord> list_records(int page, int page_size) const;
  DiagnosisRecord get_record(const std::string& record_id) const;
  ModelInfo model_info() const;

  /// Re-runs classification on the stored blob of `record`.
  ImageClassification replay(const DiagnosisRecord& record) const;

  RecordStore& store() noexcept { return store_; }

 private:
  TileSpec tile_spec() const;

  ServiceConfig config_;
  std::shared_ptr<const nn::Model> model_;
  std::string weight_digest_;
  std::string model_id_;
  RecordStore store_;
};

/// HTTP transport for DiagnosisService.
class HttpServer {
 public:
  explicit HttpServer(DiagnosisService& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds host:port (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  DiagnosisService& service_;
  std::unique_ptr<httplib::Server> server_;
};

/// Maps library error codes onto HTTP status codes.
int http_status_for(ErrorCode code);

}  // namespace histo::service

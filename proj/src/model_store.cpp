#include "bidscape/model_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "bidscape/error.hpp"
#include "bidscape/json_io.hpp"

namespace bidscape {

namespace fs = std::filesystem;

namespace {

std::mutex& store_mutex() {
  static std::mutex m;
  return m;
}

// Advisory exclusive lock held for the object's lifetime.
class FileLock {
 public:
  explicit FileLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw std::runtime_error("cannot open lock " + path.string() + ": " + std::strerror(errno));
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) {
        ::close(fd_);
        throw std::runtime_error("cannot lock " + path.string() + ": " + std::strerror(errno));
      }
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
  static std::atomic<unsigned long> counter{0};
  std::ostringstream tmp_name;
  tmp_name << '.' << path.filename().string() << ".tmp." << ::getpid() << '.'
           << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.' << counter++;
  const fs::path tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename into " + path.string() + ": " + ec.message());
  }
}

ModelStore::ModelStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "models");
  fs::create_directories(root_ / "logs");
}

fs::path ModelStore::resolve_root(const std::string& fallback) {
  const char* env = std::getenv("BIDSCAPE_STORE");
  return (env && *env) ? fs::path(env) : fs::path(fallback);
}

std::string ModelStore::file_name_for(const std::string& group) {
  static const char* digits = "0123456789abcdef";
  std::string name = "g";
  for (unsigned char c : group) {
    name += digits[c >> 4];
    name += digits[c & 0xF];
  }
  return name + ".json";
}

std::map<std::string, std::string> ModelStore::read_index() const {
  const fs::path path = root_ / "index.json";
  if (!fs::exists(path)) return {};
  const Json j = [&] {
    try {
      return Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
      throw IntegrityError(path.string() + ": invalid JSON: " + e.what());
    }
  }();
  std::map<std::string, std::string> index;
  auto groups = j.find("groups");
  if (groups == j.end() || !groups->is_object()) throw IntegrityError(path.string() + ": missing 'groups' object");
  for (const auto& [group, file] : groups->items()) {
    if (!file.is_string()) throw IntegrityError(path.string() + ": file for group '" + group + "' is not a string");
    index[group] = file.get<std::string>();
  }
  return index;
}

void ModelStore::write_index(const std::map<std::string, std::string>& index) {
  Json groups = Json::object();
  for (const auto& [group, file] : index) groups[group] = file;
  Json j;
  j["groups"] = std::move(groups);
  write_file_atomic(root_ / "index.json", j.dump(2) + "\n");
}

void ModelStore::save(const BidLandscape& landscape) {
  const std::string file = file_name_for(landscape.group);
  const std::string content = dump_landscape(landscape);
  std::lock_guard guard(store_mutex());
  {
    FileLock group_lock(root_ / "models" / (file + ".lock"));
    write_file_atomic(root_ / "models" / file, content);
  }
  FileLock index_lock(root_ / "index.lock");
  auto index = read_index();
  index[landscape.group] = file;
  write_index(index);
}

BidLandscape ModelStore::load(const std::string& group) const {
  const auto index = read_index();
  auto it = index.find(group);
  if (it == index.end()) throw NotFoundError("no landscape for group '" + group + "'");
  const fs::path path = root_ / "models" / it->second;
  std::string text;
  try {
    text = read_file(path);
  } catch (const NotFoundError&) {
    throw IntegrityError(path.string() + ": indexed model file is missing");
  }
  BidLandscape l = parse_landscape(text, path.string());
  if (l.group != group) throw IntegrityError(path.string() + ": holds group '" + l.group + "', expected '" + group + "'");
  return l;
}

bool ModelStore::contains(const std::string& group) const { return read_index().count(group) > 0; }

std::vector<std::string> ModelStore::groups() const {
  std::vector<std::string> out;
  for (const auto& [group, file] : read_index()) out.push_back(group);
  return out;
}

std::map<std::string, std::string> ModelStore::index() const { return read_index(); }

std::string ModelStore::append_logs(const std::vector<AuctionSnapshot>& snapshots) {
  std::ostringstream out;
  write_log(out, snapshots, LogFormat::kJsonl);
  std::lock_guard guard(store_mutex());
  FileLock lock(root_ / "logs.lock");
  std::size_t next = 1;
  for (const auto& entry : fs::directory_iterator(root_ / "logs")) {
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".jsonl" || name.front() == '.') continue;
    next = std::max<std::size_t>(next, std::strtoull(name.c_str(), nullptr, 10) + 1);
  }
  char name[32];
  std::snprintf(name, sizeof(name), "%06zu.jsonl", next);
  write_file_atomic(root_ / "logs" / name, out.str());
  return name;
}

std::vector<AuctionSnapshot> ModelStore::load_logs() const {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root_ / "logs")) {
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() == ".jsonl" && name.front() != '.') files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<AuctionSnapshot> all;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    ParseResult parsed = parse_log(in, LogFormat::kJsonl);
    if (!parsed.issues.empty()) {
      const auto& issue = parsed.issues.front();
      throw IntegrityError(path.string() + ": line " + std::to_string(issue.line) + ": " + issue.message);
    }
    for (auto& s : parsed.snapshots) all.push_back(std::move(s));
  }
  return all;
}

}  // namespace bidscape

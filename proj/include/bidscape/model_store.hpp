#pragma once

// On-disk store for landscapes and ingested logs.
//
// Layout under root:
//   index.json                {"groups": {group: file}}
//   models/<hex(group)>.json  one landscape per group
//   logs/<NNNNNN>.jsonl       ingested batches, auction_log JSONL
//
// Every file is written to a temporary name and renamed into place. Writers
// take an flock on a per-group lock file and on the index lock, plus an
// in-process mutex, so concurrent saves from threads or processes serialise.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bidscape/auction_log.hpp"
#include "bidscape/landscape.hpp"

namespace bidscape {

class ModelStore {
 public:
  /// Creates the directory layout if needed.
  explicit ModelStore(std::filesystem::path root);

  /// $BIDSCAPE_STORE when set, otherwise `fallback`.
  static std::filesystem::path resolve_root(const std::string& fallback = "bidscape_store");

  const std::filesystem::path& root() const { return root_; }

  void save(const BidLandscape& landscape);

  /// Throws NotFoundError for an unknown group and IntegrityError naming the
  /// file when it cannot be read back.
  BidLandscape load(const std::string& group) const;

  bool contains(const std::string& group) const;
  std::vector<std::string> groups() const;
  std::map<std::string, std::string> index() const;

  /// Stores one batch of validated snapshots; returns the batch file name.
  std::string append_logs(const std::vector<AuctionSnapshot>& snapshots);
  std::vector<AuctionSnapshot> load_logs() const;

  static std::string file_name_for(const std::string& group);

 private:
  std::map<std::string, std::string> read_index() const;
  void write_index(const std::map<std::string, std::string>& index);

  std::filesystem::path root_;
};

/// Writes `content` to a temporary sibling of `path` and renames it over
/// `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace bidscape

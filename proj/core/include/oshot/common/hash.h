#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace oshot {

// Hex SHA-1 of `data`.
std::string sha1_hex(std::string_view data);

// Git blob id: sha1("blob <size>\0" + content).
std::string git_blob_hash(std::string_view content);
std::string git_blob_hash_file(const std::filesystem::path& path);

// Order-independent over file names: sorted walk, hashing "relpath blobid\n".
std::string git_tree_hash(const std::filesystem::path& dir);

}  // namespace oshot

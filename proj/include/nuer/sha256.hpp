#pragma once

#include <cstdint>
#include <string>

namespace nuer {

// SHA-256 of a byte buffer, returned as lowercase hex. Used for vocabulary
// and checkpoint-blob integrity hashes.
std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);

// Hash of a whole file's contents. Throws IoError if the file cannot be read.
std::string sha256_file(const std::string& path);

}  // namespace nuer

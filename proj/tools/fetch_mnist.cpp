#include "fetch_mnist.hpp"

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <vector>

#include <openssl/evp.h>
#include <zlib.h>

#include <httplib.h>

#include "sparsebound/dataio.hpp"

namespace fs = std::filesystem;

namespace {

struct MnistFile {
    const char* gz_name;
    const char* out_name;
    const char* sha256;
};

// published digests of the canonical gzip archives
constexpr MnistFile kFiles[4] = {
    {"train-images-idx3-ubyte.gz", "train-images.idx3",
     "440fcabf73cc546fa21475e81ea370265605f56be210a4024d2ca8f203523609"},
    {"train-labels-idx1-ubyte.gz", "train-labels.idx1",
     "3552534a0a558bbed6aed32b30c495cca23d567ec52cac8be1a0730e8010255c"},
    {"t10k-images-idx3-ubyte.gz", "test-images.idx3",
     "8d422c7b0a1c1c79245a5bcf07fe86e33eeafee792b84584aec276f5a2dbc4e6"},
    {"t10k-labels-idx1-ubyte.gz", "test-labels.idx1",
     "f7ae60f92e00ec6debd23a6088c31dbd2371eca3ffa0defaefb259924204aec6"},
};

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& compressed) {
    z_stream strm{};
    if (inflateInit2(&strm, 16 + MAX_WBITS) != Z_OK)
        throw std::runtime_error("zlib initialization failed");

    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> buffer(1 << 16);
    strm.next_in = const_cast<Bytef*>(compressed.data());
    strm.avail_in = static_cast<uInt>(compressed.size());
    int ret = Z_OK;
    do {
        strm.next_out = buffer.data();
        strm.avail_out = static_cast<uInt>(buffer.size());
        ret = inflate(&strm, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&strm);
            throw std::runtime_error("gzip stream is corrupt");
        }
        out.insert(out.end(), buffer.data(), buffer.data() + (buffer.size() - strm.avail_out));
    } while (ret != Z_STREAM_END);
    inflateEnd(&strm);
    return out;
}

std::vector<std::uint8_t> http_get(const std::string& base_url, const std::string& name) {
    // split http://host/path
    std::string url = base_url;
    const std::string scheme = "http://";
    if (url.rfind(scheme, 0) != 0)
        throw std::runtime_error("only plain http mirrors are supported: " + url);
    url = url.substr(scheme.size());
    const auto slash = url.find('/');
    const std::string host = slash == std::string::npos ? url : url.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : url.substr(slash);
    if (path.empty() || path.back() != '/') path += '/';
    path += name;

    httplib::Client client(host);
    client.set_follow_location(true);
    client.set_read_timeout(60, 0);
    auto res = client.Get(path);
    if (!res) throw std::runtime_error("download failed for " + name + " (no response)");
    if (res->status != 200)
        throw std::runtime_error("download failed for " + name + " (status " +
                                 std::to_string(res->status) + ")");
    return std::vector<std::uint8_t>(res->body.begin(), res->body.end());
}

}  // namespace

int fetch_mnist(const std::string& out_dir, const std::string& base_url,
                const std::string& from_dir, bool verify) {
    fs::create_directories(out_dir);
    for (const MnistFile& file : kFiles) {
        std::vector<std::uint8_t> gz;
        if (!from_dir.empty()) {
            gz = sparsebound::read_file_bytes(from_dir + "/" + file.gz_name);
        } else {
            std::cout << "downloading " << file.gz_name << "\n";
            gz = http_get(base_url, file.gz_name);
        }
        if (verify) {
            const std::string digest = sha256_hex(gz);
            if (digest != file.sha256) {
                std::cerr << "SHA-256 mismatch for " << file.gz_name << "\n  expected "
                          << file.sha256 << "\n  got      " << digest
                          << "\npass --no-verify to accept anyway\n";
                return 4;
            }
        }
        sparsebound::write_file_bytes(out_dir + "/" + file.out_name, gunzip(gz));
    }
    std::cout << "IDX files ready in " << out_dir << "\n";
    return 0;
}

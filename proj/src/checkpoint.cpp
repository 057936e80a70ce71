#include "spnf/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "spnf/errors.hpp"

using nlohmann::json;

namespace spnf {

namespace {
constexpr char kMagic[4] = {'S', 'P', 'N', 'F'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const FieldParams& params, long iteration) {
    json header;
    const FieldArch& a = params.arch();
    header["hidden"] = a.hidden;
    header["color_hidden"] = a.color_hidden;
    header["levels_pos"] = a.enc.levels_pos;
    header["levels_dir"] = a.enc.levels_dir;
    header["include_input"] = a.enc.include_input;
    header["iteration"] = iteration;
    const std::string hdr = header.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw IoError("cannot open " + tmp + " for writing");
        f.write(kMagic, 4);
        uint32_t v = kVersion, len = static_cast<uint32_t>(hdr.size());
        f.write(reinterpret_cast<const char*>(&v), 4);
        f.write(reinterpret_cast<const char*>(&len), 4);
        f.write(hdr.data(), hdr.size());
        f.write(reinterpret_cast<const char*>(params.data()), sizeof(float) * params.size());
        if (!f) throw IoError("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path);
    char magic[4];
    uint32_t version = 0, len = 0;
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&len), 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw ValidationError(path + ": not an SPNF checkpoint");
    if (version != kVersion)
        throw ValidationError(path + ": unsupported checkpoint version");
    std::string hdr(len, '\0');
    f.read(hdr.data(), len);
    json header = json::parse(hdr);

    FieldArch a;
    a.hidden = header.at("hidden").get<int>();
    a.color_hidden = header.at("color_hidden").get<int>();
    a.enc.levels_pos = header.at("levels_pos").get<int>();
    a.enc.levels_dir = header.at("levels_dir").get<int>();
    a.enc.include_input = header.at("include_input").get<bool>();

    Checkpoint ckpt;
    ckpt.params = FieldParams(a);
    ckpt.iteration = header.at("iteration").get<long>();
    f.read(reinterpret_cast<char*>(ckpt.params.data()), sizeof(float) * ckpt.params.size());
    if (!f) throw ValidationError(path + ": truncated checkpoint");
    return ckpt;
}

}  // namespace spnf

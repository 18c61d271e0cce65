#include "macc/checkpoint.hpp"

#include "macc/binary_io.hpp"
#include "macc/error.hpp"

namespace macc {

namespace {

constexpr std::string_view kCheckpointMagic = "MACCNN01";

std::vector<LayerDesc> all_descriptors(const std::vector<const Network*>& nets) {
    std::vector<LayerDesc> out;
    for (const auto* n : nets) {
        auto d = n->descriptors();
        out.insert(out.end(), d.begin(), d.end());
    }
    return out;
}

std::vector<LayerDesc> read_descriptors(io::Reader& r) {
    const auto count = r.u32();
    std::vector<LayerDesc> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        LayerDesc d;
        d.kind = static_cast<LayerKind>(r.u32());
        d.extents.resize(r.u32());
        for (auto& e : d.extents) e = r.u32();
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<const Network*>& nets) {
    io::Writer w(path);
    w.magic(kCheckpointMagic);
    const auto descs = all_descriptors(nets);
    w.u32(static_cast<std::uint32_t>(descs.size()));
    for (const auto& d : descs) {
        w.u32(static_cast<std::uint32_t>(d.kind));
        w.u32(static_cast<std::uint32_t>(d.extents.size()));
        for (auto e : d.extents) w.u32(e);
    }
    for (const auto* n : nets) {
        for (const auto& p : n->parameters()) w.f64s(p.data());
    }
    w.finish();
}

void load_checkpoint(const std::filesystem::path& path, const std::vector<const Network*>& nets) {
    io::Reader r(path);
    r.expect_magic(kCheckpointMagic);
    const auto stored = read_descriptors(r);
    const auto expected = all_descriptors(nets);
    if (stored != expected) {
        std::string msg = path.string() + ": architecture mismatch";
        for (std::size_t i = 0; i < std::max(stored.size(), expected.size()); ++i) {
            const bool same = i < stored.size() && i < expected.size() && stored[i] == expected[i];
            if (!same) {
                msg += " at layer " + std::to_string(i) + ": file has " +
                       (i < stored.size() ? describe(stored[i]) : std::string("nothing")) + ", model has " +
                       (i < expected.size() ? describe(expected[i]) : std::string("nothing"));
                break;
            }
        }
        throw IoError(msg);
    }
    for (const auto* n : nets) {
        for (auto p : n->parameters()) r.f64s(p.data());
    }
    r.expect_eof();
}

std::vector<LayerDesc> read_checkpoint_descriptors(const std::filesystem::path& path) {
    io::Reader r(path);
    r.expect_magic(kCheckpointMagic);
    return read_descriptors(r);
}

}  // namespace macc

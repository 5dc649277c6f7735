#include "phycine/train/checkpoint.hpp"

#include "phycine/common/binio.hpp"
#include "phycine/common/rng.hpp"

namespace phycine::train {

namespace {
constexpr char kMagic[5] = "PHYC";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const TrainState& state) {
    BinWriter w(path);
    w.magic(kMagic);
    w.u32(kVersion);
    w.u64(state.config_hash);
    w.i32(state.stage);
    w.i32(state.iteration);
    w.u64(state.seed);

    auto& params = const_cast<model::ModelParams&>(state.params);
    auto named = params.named_tensors();
    w.u32(static_cast<std::uint32_t>(named.size()));
    for (auto& [name, t] : named) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t->shape.size()));
        for (int d : t->shape) w.u32(static_cast<std::uint32_t>(d));
        for (double v : t->data) w.f64(v);
    }

    w.u64(static_cast<std::uint64_t>(state.adam.t));
    const bool has_moments = !state.adam.m.empty();
    w.u32(has_moments ? 1 : 0);
    if (has_moments) {
        if (state.adam.m.size() != named.size())
            raise(ErrorKind::Invariant, "checkpoint: optimizer moments do not cover parameters");
        for (std::size_t i = 0; i < named.size(); ++i) {
            for (double v : state.adam.m[i]) w.f64(v);
            for (double v : state.adam.v[i]) w.f64(v);
        }
    }
    w.close();
}

TrainState load_checkpoint(const std::string& path, const model::ModelConfig& cfg) {
    BinReader r(path);
    r.expect_magic(kMagic, "checkpoint");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        raise(ErrorKind::Data, "checkpoint " + path + ": unsupported version " +
                                   std::to_string(version));

    Rng dummy(0);
    TrainState st{model::ModelParams::init(cfg, dummy), opt::Adam{}, 1, 0, 0, 0};
    st.config_hash = r.u64();
    st.stage = r.i32();
    st.iteration = r.i32();
    st.seed = r.u64();
    if (st.stage < 1 || st.stage > 3 || st.iteration < 0)
        raise(ErrorKind::Data, "checkpoint " + path + ": implausible stage/iteration");

    auto named = st.params.named_tensors();
    const std::uint32_t count = r.u32();
    if (count != named.size())
        raise(ErrorKind::Data, "checkpoint " + path + ": expected " +
                                   std::to_string(named.size()) + " tensors, found " +
                                   std::to_string(count));
    for (auto& [name, t] : named) {
        const std::string got = r.str();
        if (got != name)
            raise(ErrorKind::Data, "checkpoint " + path + ": tensor '" + got +
                                       "' where '" + name + "' expected (config mismatch?)");
        const std::uint32_t ndim = r.u32();
        if (ndim != t->shape.size())
            raise(ErrorKind::Data, "checkpoint " + path + ": rank mismatch for " + name);
        for (int d : t->shape)
            if (r.u32() != static_cast<std::uint32_t>(d))
                raise(ErrorKind::Data, "checkpoint " + path + ": shape mismatch for " + name);
        for (double& v : t->data) v = r.f64();
    }

    st.adam.t = static_cast<std::int64_t>(r.u64());
    const std::uint32_t has_moments = r.u32();
    if (has_moments > 1) raise(ErrorKind::Data, "checkpoint " + path + ": corrupt moment flag");
    if (has_moments) {
        for (auto& [name, t] : named) {
            std::vector<double> m(t->data.size()), v(t->data.size());
            for (double& x : m) x = r.f64();
            for (double& x : v) x = r.f64();
            st.adam.m.push_back(std::move(m));
            st.adam.v.push_back(std::move(v));
        }
    }
    if (!r.at_eof()) raise(ErrorKind::Data, "checkpoint " + path + ": trailing bytes");
    return st;
}

}  // namespace phycine::train

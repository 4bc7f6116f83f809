#include "raytold/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "raytold/bench.hpp"

namespace raytold {

namespace {

nnet::Activation parse_activation(const std::string& name) {
    if (name == "elu") return nnet::Activation::Elu;
    if (name == "tanh") return nnet::Activation::Tanh;
    if (name == "identity") return nnet::Activation::Identity;
    throw ConfigError("model.activation: unknown activation '" + name + "'");
}

std::string activation_name(nnet::Activation a) {
    switch (a) {
        case nnet::Activation::Elu: return "elu";
        case nnet::Activation::Tanh: return "tanh";
        case nnet::Activation::Identity: return "identity";
    }
    return "identity";
}

// Reads known keys out of one mapping and rejects anything left over.
class Section {
public:
    Section(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) {
            throw ConfigError(name_ + ": expected a mapping");
        }
    }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!node_ || node_.IsNull()) {
            return;
        }
        const YAML::Node value = node_[key];
        if (!value) {
            return;
        }
        try {
            out = value.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError(name_ + "." + key + ": cannot convert '" + YAML::Dump(value) + "'");
        }
    }

    void get(const std::string& key, Vec2& out) {
        std::vector<double> v{out.x, out.y};
        get(key, v);
        if (v.size() != 2) {
            throw ConfigError(name_ + "." + key + ": expected two numbers");
        }
        out = {v[0], v[1]};
    }

    template <class T>
    void get(const std::string& key, std::array<T, 2>& out) {
        std::vector<T> v(out.begin(), out.end());
        get(key, v);
        if (v.size() != 2) {
            throw ConfigError(name_ + "." + key + ": expected two values");
        }
        out = {v[0], v[1]};
    }

    Section child(const std::string& key) {
        seen_.insert(key);
        if (!node_ || node_.IsNull()) {
            return Section(YAML::Node(), name_ + "." + key);
        }
        return Section(node_[key], name_ + "." + key);
    }

    void finish() const {
        if (!node_ || node_.IsNull()) {
            return;
        }
        for (const auto& kv : node_) {
            const std::string key = kv.first.as<std::string>();
            if (!seen_.contains(key)) {
                throw ConfigError("unknown key " + name_ + "." + key);
            }
        }
    }

private:
    YAML::Node node_;
    std::string name_;
    std::set<std::string> seen_;
};

void read_world(Section s, WorldConfig& w) {
    Vec2 size{2.0 * w.map_half_extents.x, 2.0 * w.map_half_extents.y};
    s.get("map_size", size);
    w.map_half_extents = {0.5 * size.x, 0.5 * size.y};
    s.get("wheelbase", w.wheelbase);
    s.get("dt", w.dt);
    s.get("start", w.start);
    s.get("goal", w.goal);
    s.get("goal_radius", w.goal_radius);
    s.get("collision_clearance", w.collision_clearance);
    s.get("obstacle_radius", w.obstacle_radius);
    s.get("obstacle_count", w.obstacle_count_range);
    s.get("max_steps", w.max_steps);
    s.finish();
}

void read_sfm(Section s, SfmParams& p) {
    s.get("relax_time", p.relax_time);
    s.get("max_speed", p.max_speed);
    s.get("boundary_gain", p.boundary_gain);
    s.get("boundary_range", p.boundary_range);
    s.get("repel_gain", p.repel_gain);
    s.get("repel_range", p.repel_range);
    s.get("waypoint_reach_radius", p.waypoint_reach_radius);
    s.get("start_clearance", p.start_clearance);
    s.finish();
}

void read_lidar(Section s, LidarConfig& l) {
    s.get("num_rays", l.num_rays);
    s.get("max_range", l.max_range);
    s.get("velocity_scale", l.velocity_scale);
    s.finish();
}

void read_planner(Section s, mppi::PlannerConfig& p) {
    s.get("horizon", p.horizon);
    s.get("samples", p.samples);
    s.get("iterations", p.iterations);
    s.get("lambda", p.lambda);
    s.get("gamma", p.gamma);
    s.get("alpha", p.alpha);
    s.get("noise_std", p.noise_std);
    s.get("use_terminal_value", p.use_terminal_value);
    s.get("use_policy_mixture", p.use_policy_mixture);
    s.get("workers", p.workers);
    s.finish();
}

void read_model(Section s, told::ToldConfig& m) {
    s.get("latent_dim", m.latent_dim);
    s.get("encoder_hidden", m.encoder_hidden);
    s.get("dynamics_hidden", m.dynamics_hidden);
    s.get("reward_hidden", m.reward_hidden);
    s.get("value_hidden", m.value_hidden);
    s.get("policy_hidden", m.policy_hidden);
    std::string act = activation_name(m.activation);
    s.get("activation", act);
    m.activation = parse_activation(act);
    s.get("reward_scale", m.reward_scale);
    s.get("value_scale", m.value_scale);
    Section w = s.child("loss_weights");
    w.get("reward", m.weights.reward);
    w.get("value", m.weights.value);
    w.get("policy", m.weights.policy);
    w.get("latent", m.weights.latent);
    w.finish();
    s.get("unroll", m.unroll);
    s.get("rho", m.rho);
    s.get("gamma", m.gamma);
    s.get("tau", m.tau);
    s.get("batch_size", m.batch_size);
    s.get("learning_rate", m.learning_rate);
    s.get("buffer_capacity", m.buffer_capacity);
    s.finish();
}

void read_train(Section s, training::TrainingConfig& t) {
    s.get("env_steps", t.env_steps);
    s.get("seed_steps", t.seed_steps);
    s.get("updates_per_env_step", t.updates_per_env_step);
    s.get("exploration_std", t.exploration_std);
    s.get("seed", t.seed);
    read_planner(s.child("collect_planner"), t.collect_planner);
    s.finish();
}

void read_bench(Section s, BenchConfig& b) {
    s.get("n", b.n);
    s.get("seed", b.seed);
    s.get("methods", b.methods);
    s.get("workers", b.workers);
    s.get("crowd_stride", b.crowd_stride);
    s.finish();
}

void emit_vec2(YAML::Emitter& e, const char* key, const Vec2& v) {
    e << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq << v.x << v.y << YAML::EndSeq;
}

void emit_planner(YAML::Emitter& e, const mppi::PlannerConfig& p) {
    e << YAML::BeginMap;
    e << YAML::Key << "horizon" << YAML::Value << p.horizon;
    e << YAML::Key << "samples" << YAML::Value << p.samples;
    e << YAML::Key << "iterations" << YAML::Value << p.iterations;
    e << YAML::Key << "lambda" << YAML::Value << p.lambda;
    e << YAML::Key << "gamma" << YAML::Value << p.gamma;
    e << YAML::Key << "alpha" << YAML::Value << p.alpha;
    e << YAML::Key << "noise_std" << YAML::Value << YAML::Flow << YAML::BeginSeq << p.noise_std[0]
      << p.noise_std[1] << YAML::EndSeq;
    e << YAML::Key << "use_terminal_value" << YAML::Value << p.use_terminal_value;
    e << YAML::Key << "use_policy_mixture" << YAML::Value << p.use_policy_mixture;
    e << YAML::Key << "workers" << YAML::Value << p.workers;
    e << YAML::EndMap;
}

void emit_ints(YAML::Emitter& e, const char* key, const std::vector<int>& v) {
    e << YAML::Key << key << YAML::Value << YAML::Flow << v;
}

}  // namespace

void BenchConfig::validate() const {
    if (n < 1) {
        throw ConfigError("bench.n must be >= 1");
    }
    if (methods.empty()) {
        throw ConfigError("bench.methods must not be empty");
    }
    for (const std::string& m : methods) {
        if (!bench::find_method(m)) {
            throw ConfigError("bench.methods: unknown method '" + m + "'");
        }
    }
    if (workers < 1) {
        throw ConfigError("bench.workers must be >= 1");
    }
    if (crowd_stride < 0) {
        throw ConfigError("bench.crowd_stride must be >= 0");
    }
}

void AppConfig::finalize() {
    model.obs_dim = sim.lidar.observation_size();
    sim.validate();
    planner.validate();
    model.validate();
    train.validate();
    bench.validate();
}

AppConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    AppConfig cfg;
    if (root && !root.IsNull()) {
        if (!root.IsMap()) {
            throw ConfigError("config: top level must be a mapping");
        }
        Section top(root, "config");
        read_world(top.child("world"), cfg.sim.world);
        read_sfm(top.child("sfm"), cfg.sim.sfm);
        read_lidar(top.child("lidar"), cfg.sim.lidar);
        read_planner(top.child("planner"), cfg.planner);
        read_model(top.child("model"), cfg.model);
        read_train(top.child("train"), cfg.train);
        read_bench(top.child("bench"), cfg.bench);
        top.finish();
    }
    cfg.finalize();
    return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read config " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string dump_config(const AppConfig& c) {
    YAML::Emitter e;
    e.SetDoublePrecision(17);
    e << YAML::BeginMap;

    const WorldConfig& w = c.sim.world;
    e << YAML::Key << "world" << YAML::Value << YAML::BeginMap;
    emit_vec2(e, "map_size", {2.0 * w.map_half_extents.x, 2.0 * w.map_half_extents.y});
    e << YAML::Key << "wheelbase" << YAML::Value << w.wheelbase;
    e << YAML::Key << "dt" << YAML::Value << w.dt;
    emit_vec2(e, "start", w.start);
    emit_vec2(e, "goal", w.goal);
    e << YAML::Key << "goal_radius" << YAML::Value << w.goal_radius;
    e << YAML::Key << "collision_clearance" << YAML::Value << w.collision_clearance;
    e << YAML::Key << "obstacle_radius" << YAML::Value << w.obstacle_radius;
    e << YAML::Key << "obstacle_count" << YAML::Value << YAML::Flow << YAML::BeginSeq << w.obstacle_count_range[0]
      << w.obstacle_count_range[1] << YAML::EndSeq;
    e << YAML::Key << "max_steps" << YAML::Value << w.max_steps;
    e << YAML::EndMap;

    const SfmParams& s = c.sim.sfm;
    e << YAML::Key << "sfm" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "relax_time" << YAML::Value << s.relax_time;
    e << YAML::Key << "max_speed" << YAML::Value << s.max_speed;
    e << YAML::Key << "boundary_gain" << YAML::Value << s.boundary_gain;
    e << YAML::Key << "boundary_range" << YAML::Value << s.boundary_range;
    e << YAML::Key << "repel_gain" << YAML::Value << s.repel_gain;
    e << YAML::Key << "repel_range" << YAML::Value << s.repel_range;
    e << YAML::Key << "waypoint_reach_radius" << YAML::Value << s.waypoint_reach_radius;
    e << YAML::Key << "start_clearance" << YAML::Value << s.start_clearance;
    e << YAML::EndMap;

    e << YAML::Key << "lidar" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "num_rays" << YAML::Value << c.sim.lidar.num_rays;
    e << YAML::Key << "max_range" << YAML::Value << c.sim.lidar.max_range;
    e << YAML::Key << "velocity_scale" << YAML::Value << c.sim.lidar.velocity_scale;
    e << YAML::EndMap;

    e << YAML::Key << "planner" << YAML::Value;
    emit_planner(e, c.planner);

    const told::ToldConfig& m = c.model;
    e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "latent_dim" << YAML::Value << m.latent_dim;
    emit_ints(e, "encoder_hidden", m.encoder_hidden);
    emit_ints(e, "dynamics_hidden", m.dynamics_hidden);
    emit_ints(e, "reward_hidden", m.reward_hidden);
    emit_ints(e, "value_hidden", m.value_hidden);
    emit_ints(e, "policy_hidden", m.policy_hidden);
    e << YAML::Key << "activation" << YAML::Value << activation_name(m.activation);
    e << YAML::Key << "reward_scale" << YAML::Value << m.reward_scale;
    e << YAML::Key << "value_scale" << YAML::Value << m.value_scale;
    e << YAML::Key << "loss_weights" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "reward" << YAML::Value << m.weights.reward;
    e << YAML::Key << "value" << YAML::Value << m.weights.value;
    e << YAML::Key << "policy" << YAML::Value << m.weights.policy;
    e << YAML::Key << "latent" << YAML::Value << m.weights.latent;
    e << YAML::EndMap;
    e << YAML::Key << "unroll" << YAML::Value << m.unroll;
    e << YAML::Key << "rho" << YAML::Value << m.rho;
    e << YAML::Key << "gamma" << YAML::Value << m.gamma;
    e << YAML::Key << "tau" << YAML::Value << m.tau;
    e << YAML::Key << "batch_size" << YAML::Value << m.batch_size;
    e << YAML::Key << "learning_rate" << YAML::Value << m.learning_rate;
    e << YAML::Key << "buffer_capacity" << YAML::Value << m.buffer_capacity;
    e << YAML::EndMap;

    const training::TrainingConfig& t = c.train;
    e << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "env_steps" << YAML::Value << t.env_steps;
    e << YAML::Key << "seed_steps" << YAML::Value << t.seed_steps;
    e << YAML::Key << "updates_per_env_step" << YAML::Value << t.updates_per_env_step;
    e << YAML::Key << "exploration_std" << YAML::Value << t.exploration_std;
    e << YAML::Key << "seed" << YAML::Value << t.seed;
    e << YAML::Key << "collect_planner" << YAML::Value;
    emit_planner(e, t.collect_planner);
    e << YAML::EndMap;

    const BenchConfig& b = c.bench;
    e << YAML::Key << "bench" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "n" << YAML::Value << b.n;
    e << YAML::Key << "seed" << YAML::Value << b.seed;
    e << YAML::Key << "methods" << YAML::Value << YAML::Flow << b.methods;
    e << YAML::Key << "workers" << YAML::Value << b.workers;
    e << YAML::Key << "crowd_stride" << YAML::Value << b.crowd_stride;
    e << YAML::EndMap;

    e << YAML::EndMap;
    if (!e.good()) {
        throw ConfigError(std::string("dump_config: ") + e.GetLastError());
    }
    return std::string(e.c_str()) + "\n";
}

std::string config_hash(const AppConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char ch : dump_config(config)) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace raytold

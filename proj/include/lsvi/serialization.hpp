#pragma once

#include "lsvi/analysis.hpp"

#include <json.hpp>

namespace lsvi {

using Json = nlohmann::ordered_json;

inline Json to_json(const TabularMDP& mdp) {
    const int S = mdp.n_states(), A = mdp.n_actions();
    Json transition = Json::array(), reward = Json::array();
    for (int s = 0; s < S; ++s) {
        Json per_a = Json::array(), r = Json::array();
        for (int a = 0; a < A; ++a) {
            const auto row = mdp.transition_row(s, a);
            per_a.push_back(std::vector<double>(row.begin(), row.end()));
            r.push_back(mdp.reward(s, a));
        }
        transition.push_back(std::move(per_a));
        reward.push_back(std::move(r));
    }
    const auto init = mdp.initial_dist();
    return Json{{"n_states", S},
                {"n_actions", A},
                {"horizon", mdp.horizon()},
                {"transition", std::move(transition)},
                {"reward", std::move(reward)},
                {"initial_dist", std::vector<double>(init.begin(), init.end())}};
}

inline TabularMDP tabular_mdp_from_json(const Json& j) {
    const int S = j.at("n_states").get<int>(), A = j.at("n_actions").get<int>();
    std::vector<double> transition, reward;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const auto row = j.at("transition").at(s).at(a).get<std::vector<double>>();
            require(row.size() == static_cast<std::size_t>(S), "mdp json: transition row size");
            transition.insert(transition.end(), row.begin(), row.end());
            reward.push_back(j.at("reward").at(s).at(a).get<double>());
        }
    return TabularMDP(S, A, j.at("horizon").get<int>(), std::move(transition), std::move(reward),
                      j.at("initial_dist").get<std::vector<double>>());
}

inline Json to_json(const LinearMDP& mdp) {
    const auto& phi = mdp.features->matrix();
    Json features = Json::array();
    for (int s = 0; s < mdp.features->n_states(); ++s) {
        Json per_a = Json::array();
        for (int a = 0; a < mdp.features->n_actions(); ++a) {
            const auto row = phi.row(static_cast<Eigen::Index>(s) * mdp.features->n_actions() + a);
            per_a.push_back(std::vector<double>(row.data(), row.data() + row.size()));
        }
        features.push_back(std::move(per_a));
    }
    const auto S = static_cast<std::size_t>(mdp.tabular.n_states());
    Json measures = Json::array();
    for (int i = 0; i < mdp.dim; ++i)
        measures.push_back(std::vector<double>(mdp.measures.begin() + static_cast<long>(i * S),
                                               mdp.measures.begin() + static_cast<long>((i + 1) * S)));
    Json out{{"dim", mdp.dim},
             {"sparsity", mdp.sparsity ? Json(*mdp.sparsity) : Json(nullptr)},
             {"feature_map", std::move(features)},
             {"reward_param", mdp.reward_param},
             {"transition_measures", std::move(measures)},
             {"horizon", mdp.horizon()},
             {"initial_dist", to_json(mdp.tabular).at("initial_dist")},
             {"renormalization_gap", mdp.renormalization_gap},
             {"tabular", to_json(mdp.tabular)}};
    return out;
}

inline Json to_json(const FunctionHandle& f) {
    return Json{{"class", f.class_tag}, {"params", f.params}};
}

inline FunctionHandle handle_from_json(const Json& j) {
    return {j.at("class").get<std::string>(), j.at("params").get<std::vector<double>>()};
}

inline Json to_json(const std::vector<StateActionSet::Entry>& entries) {
    Json out = Json::array();
    for (const auto& e : entries)
        out.push_back(Json::array({e.sa.state, e.sa.action, e.multiplicity}));
    return out;
}

inline Json to_json(const StateActionSet& z) { return to_json(z.entries()); }

inline StateActionSet state_action_set_from_json(const Json& j) {
    StateActionSet z;
    for (const auto& e : j)
        z.add(e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<std::uint64_t>());
    return z;
}

inline Json to_json(const SamplingPlan& p) {
    return Json{{"eps0", p.eps0},     {"p", p.p},           {"inv_p", p.inv_p},
                {"lambda", p.lambda}, {"eps", p.eps},       {"delta", p.delta},
                {"l1", p.l1},         {"target", p.target}, {"log_cover", p.log_cover},
                {"z_size", p.z_size}, {"sampling_constant", p.sampling_constant}};
}

inline Json to_json(const BonusDiagnostics& d) {
    return Json{{"plan", to_json(d.plan)},
                {"source_size", d.source_size},
                {"sampled_size", d.sampled_size},
                {"sampled_distinct", d.sampled_distinct},
                {"size_guard", d.size_guard},
                {"distinct_guard", d.distinct_guard},
                {"size_cap", d.size_cap},
                {"distinct_cap", d.distinct_cap},
                {"cover_resolution", d.cover_resolution},
                {"beta", d.beta}};
}

/// Bonus as (anchor params, kept set, radius), enough to rebuild it with the class.
template <FunctionClass C>
Json to_json(const BonusFunction<C>& b) {
    return Json{{"anchor", to_json(b.anchor())},
                {"kept", to_json(b.kept())},
                {"radius", b.radius()},
                {"diagnostics", to_json(b.diagnostics())}};
}

template <FunctionClass C>
BonusFunction<C> bonus_from_json(const C& cls, const Json& j) {
    return BonusFunction<C>(cls, handle_from_json(j.at("anchor")),
                            state_action_set_from_json(j.at("kept")), j.at("radius").get<double>());
}

inline Json to_json(const AgentConfig& c) {
    return Json{{"m_max", c.m_max},     {"delta", c.delta}, {"l1", c.l1},
                {"c_prime", c.c_prime}, {"zeta", c.zeta},   {"sampling_constant", c.sampling_constant},
                {"use_bonus", c.use_bonus}};
}

inline Json to_json(const Trajectory& t) {
    Json steps = Json::array();
    for (const auto& st : t.steps)
        steps.push_back(Json::array({st.state, st.action, st.reward, st.next_state}));
    return Json{{"episode", t.episode}, {"policy", t.policy_tag}, {"steps", std::move(steps)}};
}

inline Json to_json(const EpochModel& m) {
    Json fits = Json::array(), bonuses = Json::array();
    for (const auto& f : m.fits)
        fits.push_back(to_json(f));
    for (const auto& b : m.bonuses)
        bonuses.push_back(Json{{"anchor", to_json(b.anchor)},
                               {"kept", to_json(b.kept)},
                               {"radius", b.radius},
                               {"diagnostics", to_json(b.diagnostics)}});
    std::vector<bool> converged(m.erm_converged.begin(), m.erm_converged.end());
    return Json{{"epoch", m.epoch},
                {"first_episode", m.first_episode},
                {"last_episode", m.last_episode},
                {"fits", std::move(fits)},
                {"erm_objective", m.erm_objective},
                {"erm_converged", converged},
                {"bonuses", std::move(bonuses)},
                {"q", m.q},
                {"policy", m.policy().actions()}};
}

inline Json to_json(const RunLog& log) {
    Json epochs = Json::array(), trajectories = Json::array();
    for (const auto& e : log.epochs)
        epochs.push_back(to_json(e));
    for (const auto& t : log.trajectories)
        trajectories.push_back(to_json(t));
    return Json{{"algorithm", log.algorithm},
                {"class", log.class_kind},
                {"seed", log.seed},
                {"config", to_json(log.config)},
                {"schedule",
                 {{"m0", log.schedule.m0},
                  {"m_max", log.schedule.m_max},
                  {"episodes", log.schedule.episodes},
                  {"t_total", log.schedule.t_total}}},
                {"warmup",
                 {{"m0", log.warmup.m0},
                  {"inner", log.warmup.inner},
                  {"uncapped", log.warmup.uncapped},
                  {"capped", log.warmup.capped}}},
                {"beta", log.beta},
                {"counters",
                 {{"erm_solves", log.counters.erm_solves},
                  {"bonus_builds", log.counters.bonus_builds},
                  {"guard_trips", log.counters.guard_trips},
                  {"erm_nonconverged", log.counters.erm_nonconverged},
                  {"width_lower_bounds", log.counters.width_lower_bounds}}},
                {"epochs", std::move(epochs)},
                {"trajectories", std::move(trajectories)}};
}

inline Json to_json(const SurpriseEstimate& e) {
    return Json{{"l1_upper", e.finite ? Json(e.l1_upper) : Json(nullptr)},
                {"method", e.method},
                {"policies_probed", e.policies_probed},
                {"worst_policy", e.worst_policy_tag},
                {"worst_step", e.worst_step},
                {"min_eigenvalue", e.min_eigenvalue},
                {"finite", e.finite}};
}

} // namespace lsvi

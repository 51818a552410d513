#include "molbuild/sampler.hpp"

namespace molbuild {

template <class T>
TasarResult tasar_sample(const Policy<T>& policy, const Molecule& m0, const DesignSpace& space,
                         const TasarConfig& config, const BatchObjective& objective, Rng& rng) {
  const MoleculeSpace<T> tree(policy, space);
  auto score = [&objective](const std::vector<const DesignState*>& states) {
    std::vector<Molecule> molecules;
    molecules.reserve(states.size());
    for (const auto* s : states) molecules.push_back(s->molecule());
    return objective(molecules);
  };
  TasarResult result;
  auto traces = tasar_search(tree, DesignState(m0), config, score, rng, &result.rounds);
  result.traces.reserve(traces.size());
  for (auto& t : traces) {
    result.traces.push_back({t.state.molecule(), t.objective, std::move(t.choices), t.state.actions()});
  }
  return result;
}

template TasarResult tasar_sample(const Policy<float>&, const Molecule&, const DesignSpace&, const TasarConfig&,
                                  const BatchObjective&, Rng&);
template TasarResult tasar_sample(const Policy<double>&, const Molecule&, const DesignSpace&, const TasarConfig&,
                                  const BatchObjective&, Rng&);

}  // namespace molbuild

#include "uqlab/models.hpp"

namespace uqlab {

McDropoutModel train_mc_dropout(const NetworkSpec& spec, const LabeledDataset& data,
                                const TrainOptions& train, std::size_t passes,
                                std::uint64_t seed) {
    spec.validate();  // rejects rates outside [0,1)
    data.validate();
    const Rng base(seed);
    Rng init_rng = base.split(0x3cd0);
    Mlp net(spec, init_rng);
    TrainOptions opts = train;
    opts.seed = base.split(0x3cd1).raw();
    train_classifier(net, data.features, data.labels, opts);

    McDropoutModel model;
    model.spec = spec;
    model.weights = net.flatten();
    model.passes = passes;
    model.predict_seed = base.split(0x3cd2).raw();
    return model;
}

ProbEnsemble mc_dropout_predict(const McDropoutModel& model, const Tensor& x,
                                std::size_t passes, std::uint64_t seed) {
    if (passes == 0) throw ValueError("mc dropout: need at least one pass");
    Mlp net;
    {
        Rng scratch(0);
        net = Mlp(model.spec, scratch);
    }
    net.set_flat(model.weights);
    const Rng base(seed);
    std::vector<Tensor> member_probs;
    member_probs.reserve(passes);
    for (std::size_t t = 0; t < passes; ++t) {
        Rng pass_rng = base.split(0xd80 + t);
        member_probs.push_back(softmax_plain(net.logits_dropout(x, pass_rng)));
    }
    return ProbEnsemble::from_members(member_probs);
}

} // namespace uqlab

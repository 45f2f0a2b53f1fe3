"""Radio-map augmentation toolkit: CNN-LSTM positioning plus conditional-GAN
fingerprint generation with distance-based selection."""

from surimi._core import (  # noqa: F401
    E,
    AugmentedSet,
    CGanSet,
    PositioningModel,
    Predictions,
    RadioMap,
    SynthConfig,
    __version__,
    augment_radiomap,
    knn_predict,
    load_bundle,
    load_dataset,
    one_hot,
    positioning_errors,
    save_augmented_csv,
    save_bundle,
    save_dataset,
    select_fingerprints,
    synth_generate,
    to_powed,
    train_cgan,
    train_positioning,
)

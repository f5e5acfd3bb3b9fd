"""Reference results obtained with the original pretrained models.

These are embedded in report footers for context. They depend on detector,
embedder and classifier weights that are not part of this package, so the
numbers are documented, never recomputed or asserted.
"""

REFERENCE_NOTE = (
    "Reference values from the original full-scale setup (pretrained face embedder and "
    "emotion/attribute classifiers, CelebA-trained generator). Not reproducible with the "
    "bundled adapters; shown for comparison only."
)

# mean cosine distance between original and anonymized embeddings
ANONYMITY_MEANS = {
    "original": 0.0000,
    "ours": 0.7145,
    "deepprivacy2": 0.8119,
    "ciagan": 0.9280,
    "pixelate-8": 0.8791,
    "pixelate-16": 0.6651,
    "blur-9": 0.0102,
    "blur-17": 0.0725,
}

# mean class-probability distance per emotion: (ours, deepprivacy2, ciagan)
EMOTION_DISTANCES = {
    "affectnet": {
        "neutral": (0.09, 0.17, 0.10),
        "anger": (0.14, 0.19, 0.15),
        "contempt": (0.09, 0.18, 0.10),
        "disgust": (0.10, 0.19, 0.12),
        "fear": (0.15, 0.12, 0.11),
        "happy": (0.13, 0.11, 0.10),
        "sadness": (0.10, 0.16, 0.09),
        "surprise": (0.10, 0.20, 0.10),
    },
    "ck+": {
        "anger": (0.14, 0.30, 0.18),
        "contempt": (0.09, 0.25, 0.04),
        "disgust": (0.21, 0.30, 0.23),
        "fear": (0.06, 0.08, 0.06),
        "happy": (0.07, 0.31, 0.19),
        "sadness": (0.09, 0.14, 0.14),
        "surprise": (0.08, 0.26, 0.05),
    },
    "faces": {
        "neutral": (0.11, 0.31, 0.12),
        "anger": (0.11, 0.36, 0.14),
        "disgust": (0.08, 0.18, 0.15),
        "fear": (0.02, 0.16, 0.07),
        "happy": (0.04, 0.17, 0.02),
        "sadness": (0.13, 0.31, 0.15),
    },
}

# signed-rank statistics: emotion -> ((Z, r) ours vs deepprivacy2, (Z, r) ours vs ciagan, N)
SIGNED_RANK_STATISTICS = {
    "affectnet": {
        "neutral": ((-26.149391, -0.499194), (-26.183915, -0.492635), 2744),
        "anger": ((-10.844502, -0.207023), (-10.331517, -0.194381), 2744),
        "contempt": ((-26.046682, -0.497233), (-26.187686, -0.492706), 2744),
        "disgust": ((-25.431412, -0.485488), (-25.441451, -0.478666), 2744),
        "fear": ((-15.905089, -0.303630), (-15.850979, -0.298227), 2744),
        "happy": ((-12.989478, -0.247970), (-12.821720, -0.241233), 2744),
        "sadness": ((-4.724173, -0.090185), (-4.195525, -0.078936), 2744),
        "surprise": ((-25.921903, -0.494851), (-26.142871, -0.491863), 2744),
    },
    "ck+": {
        "anger": ((-3.941178, -0.477938), (-3.415688, -0.414213), 68),
        "contempt": ((-4.326130, -0.524620), (-6.495306, -0.787672), 68),
        "disgust": ((-3.635660, -0.440889), (-1.411492, -0.171169), 68),
        "fear": ((-3.067397, -0.371977), (-3.201825, -0.388278), 68),
        "happy": ((-3.415688, -0.414213), (-3.440129, -0.417177), 68),
        "sadness": ((-1.454264, -0.176355), (-4.741634, -0.575008), 68),
        "surprise": ((-1.949203, -0.236376), (-4.069495, -0.493499), 68),
    },
    "faces": {
        "neutral": ((-6.869167, -0.469567), (-4.080480, -0.278936), 214),
        "happy": ((-0.043556, -0.002977), (-1.633626, -0.111672), 214),
        "sadness": ((-4.305428, -0.294313), (-2.366910, -0.161799), 214),
        "fear": ((-1.064641, -0.072777), (-8.291628, -0.566804), 214),
        "disgust": ((-2.459535, -0.168130), (-8.192387, -0.560020), 214),
        "anger": ((-6.771028, -0.462858), (-1.945685, -0.133004), 214),
    },
}

# the AffectNet "ours vs ciagan" effect sizes are consistent with the full
# validation split (2825 images) rather than the 2744 listed alongside them
AFFECTNET_CIAGAN_EFFECT_N = 2825

# training-scenario F1: dataset -> method -> (accuracy, macro F1, weighted F1)
TRAINING_F1 = {
    "affectnet": {
        "original": (0.58, 0.58, 0.58),
        "ours": (0.37, 0.33, 0.33),
        "deepprivacy2": (0.30, 0.29, 0.29),
        "ciagan": (0.38, 0.38, 0.38),
    },
    "ck+": {
        "original": (0.99, 0.97, 0.99),
        "ours": (0.69, 0.52, 0.65),
        "deepprivacy2": (0.46, 0.31, 0.44),
        "ciagan": (0.62, 0.55, 0.62),
    },
    "faces": {
        "original": (0.97, 0.97, 0.97),
        "ours": (0.81, 0.81, 0.80),
        "deepprivacy2": (0.67, 0.67, 0.67),
        "ciagan": (0.75, 0.74, 0.74),
    },
}

# share of trait-positive originals no longer predicted after anonymization
TRAIT_REMOVAL = {
    "Bald": 1.000000,
    "Gray_Hair": 1.000000,
    "Double_Chin": 0.998494,
    "Blurry": 0.996370,
    "Pale_Skin": 0.996337,
    "Wearing_Hat": 0.993348,
    "Wearing_Necktie": 0.992764,
    "Mustache": 0.992661,
    "Chubby": 0.984813,
    "Goatee": 0.973311,
    "Wearing_Necklace": 0.972358,
    "Eyeglasses": 0.966012,
    "Sideburns": 0.949251,
    "Big_Nose": 0.899965,
    "Receding_Hairline": 0.877510,
    "Bags_Under_Eyes": 0.852971,
    "Big_Lips": 0.780942,
    "Wearing_Earrings": 0.768467,
    "Black_Hair": 0.729177,
    "Bushy_Eyebrows": 0.721409,
    "5_o_Clock_Shadow": 0.636142,
    "Straight_Hair": 0.630562,
    "Bangs": 0.620606,
    "Rosy_Cheeks": 0.615530,
    "Blond_Hair": 0.615213,
    "Pointy_Nose": 0.516256,
    "Brown_Hair": 0.480853,
    "Wavy_Hair": 0.410118,
    "Narrow_Eyes": 0.400334,
    "Male": 0.276199,
    "Arched_Eyebrows": 0.097596,
    "Mouth_Slightly_Open": 0.089010,
    "High_Cheekbones": 0.083279,
    "Heavy_Makeup": 0.054131,
    "Wearing_Lipstick": 0.048915,
    "Smiling": 0.046791,
    "Oval_Face": 0.044784,
    "No_Beard": 0.031004,
    "Attractive": 0.028488,
    "Young": 0.001595,
}

CELEBA_TRAITS = sorted(TRAIT_REMOVAL)

EMOTIONS = {
    "affectnet": ["neutral", "anger", "contempt", "disgust", "fear", "happy", "sadness", "surprise"],
    "ck+": ["anger", "contempt", "disgust", "fear", "happy", "sadness", "surprise"],
    "faces": ["neutral", "anger", "disgust", "fear", "happy", "sadness"],
}


def _training_f1() -> dict:
    return {
        ds: {m: dict(zip(("accuracy", "macro_f1", "weighted_f1"), v)) for m, v in rows.items()}
        for ds, rows in TRAINING_F1.items()
    }


def footer(kind: str) -> dict:
    """Reference block attached to a report of the given kind."""
    body = {
        "anonymity": {"mean_cosine_distance": ANONYMITY_MEANS},
        "emotion": {
            "mean_class_prob_distance": {
                ds: {e: dict(zip(("ours", "deepprivacy2", "ciagan"), v)) for e, v in rows.items()}
                for ds, rows in EMOTION_DISTANCES.items()
            },
            "signed_rank": {
                ds: {
                    e: {
                        "ours_vs_deepprivacy2": {"Z": a[0], "r": a[1]},
                        "ours_vs_ciagan": {"Z": b[0], "r": b[1]},
                        "N": n,
                    }
                    for e, (a, b, n) in rows.items()
                }
                for ds, rows in SIGNED_RANK_STATISTICS.items()
            },
            "training_scenario": _training_f1(),
        },
        "f1": {"training_scenario": _training_f1()},
        "traits": {"removal_rate": TRAIT_REMOVAL},
    }[kind]
    return {"note": REFERENCE_NOTE, **body}

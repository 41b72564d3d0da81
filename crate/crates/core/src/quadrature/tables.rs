// Lebedev–Laikov orbit generators: (orbit kind, a, b, weight / 4π).

pub(crate) struct OrbitTable {
    pub n_points: usize,
    pub degree: usize,
    pub orbits: &'static [(u8, f64, f64, f64)],
}

pub(crate) static TABLES: &[OrbitTable] = &[
    OrbitTable { n_points: 6, degree: 3, orbits: &[(1, 0.0, 0.0, 0.1666666666666667)] },
    OrbitTable { n_points: 14, degree: 5, orbits: &[(1, 0.0, 0.0, 0.6666666666666667e-1), (3, 0.0, 0.0, 7.5e-2)] },
    OrbitTable {
        n_points: 26,
        degree: 7,
        orbits: &[
            (1, 0.0, 0.0, 0.4761904761904762e-1),
            (2, 0.0, 0.0, 3.809_523_809_523_81e-2),
            (3, 0.0, 0.0, 0.3214285714285714e-1),
        ],
    },
    OrbitTable {
        n_points: 38,
        degree: 9,
        orbits: &[
            (1, 0.0, 0.0, 0.9523809523809524e-2),
            (3, 0.0, 0.0, 0.3214285714285714e-1),
            (5, 0.4597008433809831, 0.0, 0.2857142857142857e-1),
        ],
    },
    OrbitTable {
        n_points: 50,
        degree: 11,
        orbits: &[
            (1, 0.0, 0.0, 1.269_841_269_841_27e-2),
            (2, 0.0, 0.0, 0.2257495590828924e-1),
            (3, 0.0, 0.0, 2.109_375e-2),
            (4, 0.3015113445777636, 0.0, 0.2017333553791887e-1),
        ],
    },
    OrbitTable {
        n_points: 74,
        degree: 13,
        orbits: &[
            (1, 0.0, 0.0, 0.5130671797338464e-3),
            (2, 0.0, 0.0, 0.1660406956574204e-1),
            (3, 0.0, 0.0, -0.2958603896103896e-1),
            (4, 0.4803844614152614, 0.0, 0.2657620708215946e-1),
            (5, 0.3207726489807764, 0.0, 0.1652217099371571e-1),
        ],
    },
    OrbitTable {
        n_points: 86,
        degree: 15,
        orbits: &[
            (1, 0.0, 0.0, 0.1154401154401154e-1),
            (3, 0.0, 0.0, 0.1194390908585628e-1),
            (4, 0.3696028464541502, 0.0, 1.111_055_571_060_34e-2),
            (4, 0.6943540066026664, 0.0, 0.1187650129453714e-1),
            (5, 0.3742430390903412, 0.0, 0.1181230374690448e-1),
        ],
    },
    OrbitTable {
        n_points: 110,
        degree: 17,
        orbits: &[
            (1, 0.0, 0.0, 0.3828270494937162e-2),
            (3, 0.0, 0.0, 0.9793737512487512e-2),
            (4, 0.1851156353447362, 0.0, 0.8211737283191111e-2),
            (4, 0.6904210483822922, 0.0, 0.9942814891178103e-2),
            (4, 0.3956894730559419, 0.0, 0.9595471336070963e-2),
            (5, 0.4783690288121502, 0.0, 0.9694996361663028e-2),
        ],
    },
    OrbitTable {
        n_points: 146,
        degree: 19,
        orbits: &[
            (1, 0.0, 0.0, 0.5996313688621381e-3),
            (2, 0.0, 0.0, 0.7372999718620756e-2),
            (3, 0.0, 0.0, 0.7210515360144488e-2),
            (4, 0.6764410400114264, 0.0, 0.7116355493117555e-2),
            (4, 0.4174961227965453, 0.0, 0.6753829486314477e-2),
            (4, 0.1574676672039082, 0.0, 0.7574394159054034e-2),
            (6, 0.1403553811713183, 0.4493328323269557, 0.6991087353303262e-2),
        ],
    },
    OrbitTable {
        n_points: 170,
        degree: 21,
        orbits: &[
            (1, 0.0, 0.0, 0.5544842902037365e-2),
            (2, 0.0, 0.0, 0.6071332770670752e-2),
            (3, 0.0, 0.0, 0.6383674773515093e-2),
            (4, 0.2551252621114134, 0.0, 5.183_387_587_747_79e-3),
            (4, 0.6743601460362766, 0.0, 0.6317929009813725e-2),
            (4, 0.431_891_069_671_941, 0.0, 0.6201670006589077e-2),
            (5, 0.2613931360335988, 0.0, 0.5477143385137348e-2),
            (6, 0.4990453161796037, 0.1446630744325115, 0.5968383987681156e-2),
        ],
    },
    OrbitTable {
        n_points: 194,
        degree: 23,
        orbits: &[
            (1, 0.0, 0.0, 0.1782340447244611e-2),
            (2, 0.0, 0.0, 0.5716905949977102e-2),
            (3, 0.0, 0.0, 0.5573383178848738e-2),
            (4, 0.6712973442695226, 0.0, 0.5608704082587997e-2),
            (4, 0.2892465627575439, 0.0, 0.5158237711805383e-2),
            (4, 0.4446933178717437, 0.0, 0.5518771467273614e-2),
            (4, 0.1299335447650067, 0.0, 0.4106777028169394e-2),
            (5, 0.3457702197611283, 0.0, 0.5051846064614808e-2),
            (6, 0.159_041_710_538_353, 0.8360360154824589, 0.5530248916233094e-2),
        ],
    },
    OrbitTable {
        n_points: 230,
        degree: 25,
        orbits: &[
            (1, 0.0, 0.0, -0.5522639919727325e-1),
            (3, 0.0, 0.0, 0.4450274607445226e-2),
            (4, 0.4492044687397611, 0.0, 0.4496841067921404e-2),
            (4, 0.2520419490210201, 0.0, 5.049_153_450_478_75e-3),
            (4, 0.6981906658447242, 0.0, 0.3976408018051883e-2),
            (4, 0.658_740_524_346_096, 0.0, 0.4401400650381014e-2),
            (4, 4.038_544_050_097_66e-2, 0.0, 0.1724544350544401e-1),
            (5, 0.5823842309715585, 0.0, 0.4231083095357343e-2),
            (5, 0.3545877390518688, 0.0, 0.5198069864064399e-2),
            (6, 0.2272181808998187, 0.4864661535886647, 0.4695720972568883e-2),
        ],
    },
    OrbitTable {
        n_points: 266,
        degree: 27,
        orbits: &[
            (1, 0.0, 0.0, -0.1313769127326952e-2),
            (2, 0.0, 0.0, -0.2522728704859336e-2),
            (3, 0.0, 0.0, 0.4186853881700583e-2),
            (4, 0.7039373391585475, 0.0, 0.5315167977810885e-2),
            (4, 0.1012526248572414, 0.0, 0.4047142377086219e-2),
            (4, 0.4647448726420539, 0.0, 4.112_482_394_406_99e-3),
            (4, 0.3277420654971629, 0.0, 0.3595584899758782e-2),
            (4, 0.6620338663699974, 0.0, 0.4256131351428158e-2),
            (5, 0.8506508083520399, 0.0, 4.229_582_700_647_24e-3),
            (6, 0.3233484542692899, 0.1153112011009701, 0.4080914225780505e-2),
            (6, 0.2314790158712601, 0.5244939240922365, 0.4071467593830964e-2),
        ],
    },
    OrbitTable {
        n_points: 302,
        degree: 29,
        orbits: &[
            (1, 0.0, 0.0, 0.8545911725128148e-3),
            (3, 0.0, 0.0, 0.3599119285025571e-2),
            (4, 0.3515640345570105, 0.0, 0.3449788424305883e-2),
            (4, 0.6566329410219612, 0.0, 0.3604822601419882e-2),
            (4, 0.4729054132581005, 0.0, 0.3576729661743367e-2),
            (4, 0.9618308522614784e-1, 0.0, 0.2352101413689164e-2),
            (4, 0.2219645236294178, 0.0, 0.3108953122413675e-2),
            (4, 0.7011766416089545, 0.0, 0.3650045807677255e-2),
            (5, 0.2644152887060663, 0.0, 0.2982344963171804e-2),
            (5, 0.5718955891878961, 0.0, 3.600_820_932_216_46e-3),
            (6, 0.2510034751770465, 0.8000727494073952, 0.3571540554273387e-2),
            (6, 0.1233548532583327, 0.4127724083168531, 3.392_312_205_006_17e-3),
        ],
    },
];

// Generated by gen_stats_battery.py; do not edit.

#![allow(clippy::excessive_precision, clippy::approx_constant)]

#[derive(Clone, Copy)]
pub enum Test {
    Spearman,
    Paired,
    Welch,
}

pub struct Case {
    pub test: Test,
    pub a: &'static [f64],
    pub b: &'static [f64],
    pub statistic: f64,
    pub p_value: f64,
    pub dof: f64,
}

pub const CASES: &[Case] = &[
    Case { test: Test::Spearman, a: &[-1.3376, -1.0762, -0.0317, 0.5689, -0.3967], b: &[-2.9068, -1.3707, 0.4688, -0.1836, -1.9451], statistic: 0.8, p_value: 0.104088038661827858622138869426, dof: 3.0 },
    Case { test: Test::Spearman, a: &[0.2274, 0.2253, -0.5301, 0.6563, -0.5082, -0.3778], b: &[0.8197, -0.0186, 0.6262, 0.3549, -0.2014, 0.797], statistic: 0.2, p_value: 0.704, dof: 4.0 },
    Case { test: Test::Spearman, a: &[1.3756, -0.2289, -0.1203, -0.9611, 1.7587, -0.7544, 0.0338, 1.575], b: &[3.3356, -0.9335, -1.1886, 0.1712, 2.7543, -2.4634, 2.2713, 0.6092], statistic: 0.714285714285714285714285714286, p_value: 0.0465282322841673112393645504849, dof: 6.0 },
    Case { test: Test::Spearman, a: &[3.0, 0.0, 2.0, 4.0, 3.0, 2.0, 0.0, 3.0, 3.0, 2.0], b: &[0.0, 0.0, 1.0, 0.0, 2.0, 2.0, 1.0, 0.0, 2.0, 0.0], statistic: -0.0586555725441001085126707834933, p_value: 0.872131468822077643391135858452, dof: 8.0 },
    Case { test: Test::Spearman, a: &[0.7187, -0.233, -1.0908, 1.3289, -0.1568, -1.0418, 1.6366, 0.4819, 1.8171, -1.0626, -0.0882, -2.0213], b: &[0.9657, -2.0906, -2.9649, -0.53, -2.5582, -3.3525, 5.6991, 2.941, 0.8019, 1.3094, -0.7761, -1.3413], statistic: 0.58041958041958041958041958042, p_value: 0.0478559768420606763438530851236, dof: 10.0 },
    Case { test: Test::Spearman, a: &[0.2049, 1.1476, 1.5246, -0.1693, 0.3223, 0.7531, 1.9376, 0.7362, -2.419, -0.872, 1.0297, 0.3444, 0.0828, -1.7725, -0.8407], b: &[-4.7357, -5.3129, 2.6281, 3.6977, 2.1683, 3.6486, -1.864, 0.4937, 4.5639, 3.3576, -2.4511, 2.8352, -2.1187, 5.1328, 2.5441], statistic: -0.571428571428571428571428571429, p_value: 0.0260631933763628777694926843352, dof: 13.0 },
    Case { test: Test::Spearman, a: &[-1.9449, 0.983, 2.8767, 1.5677, -0.9716, 0.5864, -0.5428, -0.6441, 0.227, -1.0105, -1.8731, -0.513, 0.7217, 0.4514, -0.2345, 0.6683, -0.1365, -0.9734, -0.6833, -1.5871], b: &[-6.1469, 3.1695, 2.1614, 1.7403, 5.1427, 0.8817, -3.267, 2.5078, -0.9563, 1.6792, -2.638, -4.353, 4.3386, -1.043, -4.3977, -3.4271, 2.0959, -6.1043, 1.4397, -4.2961], statistic: 0.443609022556390977443609022556, p_value: 0.0500892217229561796136264399337, dof: 18.0 },
    Case { test: Test::Spearman, a: &[4.0, 0.0, 0.0, 4.0, 2.0, 0.0, 3.0, 2.0, 1.0, 0.0, 3.0, 2.0, 1.0, 1.0, 2.0, 3.0, 0.0, 1.0, 4.0, 0.0, 0.0, 2.0, 1.0, 2.0, 0.0], b: &[2.0, 3.0, 2.0, 2.0, 2.0, 2.0, 1.0, 1.0, 3.0, 2.0, 1.0, 2.0, 0.0, 3.0, 2.0, 3.0, 0.0, 1.0, 3.0, 3.0, 2.0, 2.0, 2.0, 1.0, 3.0], statistic: -0.119277168285127119871903596622, p_value: 0.570111810207041858817628335277, dof: 23.0 },
    Case { test: Test::Spearman, a: &[-1.1227, -0.2465, -1.5322, -0.8658, -1.2145, 1.4898, -0.8903, -1.0454, 1.4388, 0.0917, 1.4644, 1.3735, 1.904, 0.0459, -0.4495, -1.1788, -0.9576, -2.1463, 2.0122, -1.0723, 1.3826, -0.0135, 0.793, -0.0322, -0.1743, 0.5739, -0.653, -1.8243, 1.8739, 0.5878], b: &[3.2324, 4.6111, -7.9481, 0.1769, -5.9519, -1.7859, -4.2209, -0.949, 4.6551, 2.6015, 2.5318, -3.3525, 3.9317, -2.9623, 2.4043, -11.4659, 3.226, -0.0249, -2.6022, -0.3542, 5.7926, 2.962, -6.8803, -4.2357, -3.937, 5.7392, -2.6324, 3.705, -0.9071, 4.5878], statistic: 0.245828698553948832035595105673, p_value: 0.190382860098538256234632252415, dof: 28.0 },
    Case { test: Test::Spearman, a: &[-0.5631, -0.1447, -0.7636, -0.8136, -1.8712, -0.6639, 1.0848, -0.0174, -1.1934], b: &[5.1373, 1.915, -0.81, -1.6683, 10.201, -0.5639, -3.3326, -9.7547, -0.2225], statistic: -0.516666666666666666666666666667, p_value: 0.15439012098622509052492440177, dof: 7.0 },
    Case { test: Test::Paired, a: &[0.5453, 0.382, 0.4806, 0.4482], b: &[0.4828, 0.3562, 0.5042, 0.4253], statistic: -1.24136615356848303855155844808, p_value: 0.302686521968904190693396399509, dof: 3.0 },
    Case { test: Test::Paired, a: &[0.4865, 0.4156, 0.4998, 0.5063, 0.4188, 0.5631], b: &[0.461, 0.413, 0.4684, 0.4679, 0.3909, 0.5334], statistic: -5.19029877454134583254607140967, p_value: 0.0034951667180343023662518838562, dof: 5.0 },
    Case { test: Test::Paired, a: &[0.5708, 0.5662, 0.497, 0.5664, 0.5162, 0.5414, 0.6068, 0.5457, 0.5424], b: &[0.5564, 0.5746, 0.47, 0.5462, 0.495, 0.5382, 0.5762, 0.5527, 0.5491], statistic: -2.03722468658316771777081147553, p_value: 0.0760004798788192664885489375899, dof: 8.0 },
    Case { test: Test::Paired, a: &[0.5328, 0.445, 0.5014, 0.3895, 0.5398, 0.4795, 0.5177, 0.5474, 0.5106, 0.527, 0.5252, 0.5064], b: &[0.5111, 0.441, 0.4956, 0.3694, 0.5462, 0.4828, 0.4909, 0.5326, 0.4821, 0.5512, 0.4953, 0.4992], statistic: -2.19893529716268171123116855431, p_value: 0.0501793337546749158391490544818, dof: 11.0 },
    Case { test: Test::Paired, a: &[0.4889, 0.4165, 0.4421, 0.4375, 0.479, 0.5473, 0.4307, 0.5476, 0.5578, 0.5081, 0.395, 0.5419, 0.4588, 0.5972, 0.4342], b: &[0.4867, 0.4347, 0.4454, 0.4601, 0.4931, 0.5563, 0.4478, 0.5253, 0.5937, 0.5022, 0.3971, 0.5243, 0.4443, 0.6145, 0.464], statistic: 1.59342518113462821079006910414, p_value: 0.133385137906744864757762151085, dof: 14.0 },
    Case { test: Test::Paired, a: &[0.5548, 0.5513, 0.5494, 0.5155, 0.4882, 0.5026, 0.4942, 0.5185, 0.4833, 0.5731, 0.4287, 0.4294, 0.5812, 0.5667, 0.4923, 0.4135, 0.5468, 0.4633, 0.5267, 0.5403], b: &[0.5896, 0.5854, 0.579, 0.5342, 0.4885, 0.5443, 0.5333, 0.5431, 0.4904, 0.5949, 0.4526, 0.4249, 0.6367, 0.575, 0.4989, 0.452, 0.5662, 0.4696, 0.54, 0.5802], statistic: 6.38095642178918454262561324345, p_value: 0.00000403701095589268687821620492499, dof: 19.0 },
    Case { test: Test::Paired, a: &[0.3837, 0.4646, 0.5127, 0.5447, 0.4397, 0.5672, 0.5798, 0.4908, 0.5015, 0.5472, 0.5047, 0.4386, 0.4361, 0.4896, 0.5494, 0.4493, 0.4575, 0.4605, 0.4923, 0.5422, 0.4446, 0.5195, 0.5044, 0.5558, 0.405, 0.4781, 0.5003], b: &[0.3965, 0.5214, 0.57, 0.5702, 0.491, 0.5771, 0.6147, 0.5308, 0.5023, 0.5642, 0.5476, 0.4696, 0.4289, 0.5299, 0.6047, 0.4612, 0.4964, 0.4595, 0.5151, 0.5667, 0.4662, 0.5274, 0.5091, 0.5909, 0.4503, 0.5128, 0.5143], statistic: 7.53042178164849436937532888582, p_value: 0.0000000539457332659138196059133623289, dof: 26.0 },
    Case { test: Test::Paired, a: &[0.5367, 0.4839, 0.508, 0.5133, 0.522, 0.3958, 0.4151, 0.5104, 0.5027], b: &[0.5869, 0.5223, 0.5466, 0.5591, 0.5757, 0.4746, 0.4415, 0.5488, 0.5467], statistic: 9.44241774861654534248527576059, p_value: 0.0000130050287766601596280013983613, dof: 8.0 },
    Case { test: Test::Welch, a: &[0.4925, 0.5184, 0.4079, 0.4892], b: &[0.1959, 0.4567, 0.3957, 0.3678], statistic: 2.02283385591235249504392577982, p_value: 0.112001493345514487365848963198, dof: 4.06538160159195656992403342685 },
    Case { test: Test::Welch, a: &[0.4149, 0.5507, 0.5157, 0.6227, 0.5577], b: &[0.6007, 0.3682, 0.4449, 0.6402, 0.5536, 0.5109, 0.4218, 0.5586, 0.3954], statistic: 0.705552103936682148760918182382, p_value: 0.496265789201735071382369824167, dof: 10.1987733444739958376884065342 },
    Case { test: Test::Welch, a: &[0.4952, 0.5733, 0.4135, 0.3299, 0.6163, 0.6098, 0.6024, 0.2125, 0.67, 0.4057], b: &[0.4325, 0.4527, 0.6299, 0.4687, 0.5332, 0.4807], statistic: -0.121970878212634754185807968746, p_value: 0.904695802468399716184451077451, dof: 13.6789683425546326829079280698 },
    Case { test: Test::Welch, a: &[0.466, 0.5942, 0.5851, 0.6201, 0.5706, 0.3806, 0.8528, 0.3409, 0.4591, 0.4787, 0.5497, 0.4911], b: &[0.6654, 0.4243, 0.6047, 0.5848, 0.6516, 0.5431, 0.4381, 0.5239, 0.4824, 0.4901, 0.6572, 0.3367], statistic: -0.0229842868917677797027125154736, p_value: 0.981881617449628450375109617377, dof: 20.8250925712719287496374811461 },
    Case { test: Test::Welch, a: &[0.3549, 0.3939, 0.5583], b: &[0.596, 0.7025, 0.467, 0.5401, 0.4423, 0.4095, 0.5246, 0.2675, 0.3131, 0.6573, 0.4455, 0.4926, 0.5079, 0.2819, 0.4271, 0.476, 0.4518, 0.6269, 0.5146, 0.5056], statistic: -0.694676925687170331265998289115, p_value: 0.541900431981945970918916225216, dof: 2.71998661280041855636206454335 },
    Case { test: Test::Welch, a: &[0.2632, 0.4799, 0.3541, 0.6988, 0.6433, 0.3408, 0.3566, 0.3918, 0.4623, 0.5207, 0.5078, 0.5256, 0.2081, 0.1669, 0.3456, 0.2916, 0.7137, 0.3729, 0.4623, 0.4977, 0.3624, 0.4531, 0.2976, 0.6246, 0.5908], b: &[0.2742, 0.585, 0.5066, 0.3448, 0.5926, 0.5572, 0.4814, 0.5835], statistic: -1.03608130447288138194723907288, p_value: 0.317394879354306504464327346163, dof: 14.2772806354988316614651625102 },
    Case { test: Test::Welch, a: &[0.6156, 0.5494, 0.7317, 0.5276, 0.4832, 0.3996, 0.4668], b: &[0.3219, 0.4715, 0.5557, 0.6353, 0.602, 0.5855, 0.4689], statistic: 0.328414714806037288384749887709, p_value: 0.74825844020483138721141635395, dof: 11.9991167721441577457548159884 },
    Case { test: Test::Welch, a: &[0.624, 0.2839, 0.5948, 0.6062, 0.3309, 0.3654, 0.3197, 0.3981, 0.3927, 0.3614, 0.2936, 0.8123, 0.2342, 0.4604, 0.3066, 0.8338], b: &[0.6961, 0.5844, 0.4559, 0.5592, 0.4445, 0.6199, 0.5497, 0.5157, 0.5667, 0.5844, 0.3646, 0.7188, 0.5178, 0.5559, 0.5074, 0.3545, 0.4429, 0.4028, 0.5357, 0.4361, 0.6888, 0.5144, 0.3999, 0.5508, 0.5366, 0.6819, 0.5233, 0.5172, 0.5137, 0.4537], statistic: -1.51082919084046601926329621809, p_value: 0.147169703959349897450782032158, dof: 19.1357191748036321966487621994 },
];

/// `(p-values, adjusted)`, alpha 0.05.
pub const BONFERRONI: &[(&[f64], &[f64])] = &[
    (&[0.014679, 0.187327, 0.169768], &[0.0440369999999999980205833693958, 0.561980999999999980554221679085, 0.509304000000000006709299782415]),
    (&[0.000451, 0.979794, 0.139445, 0.625678, 0.004234, 0.114903, 0.898828, 0.563128, 0.233473], &[0.00405900000000000010791367799357, 1.0, 1.0, 1.0, 0.0381059999999999992476018562115, 1.0, 1.0, 1.0, 1.0]),
    (&[0.16822, 0.070192, 0.456117, 0.10873, 0.038926, 0.391526, 0.022614, 0.005146, 0.858928, 0.583227, 0.054356, 0.410479, 0.32021, 0.198916, 0.495171, 0.001373, 0.368121, 0.034028, 0.990996, 0.035055, 0.246671, 0.514799, 0.248772, 0.160726, 0.073548, 0.031328, 0.008227, 9.5e-05, 0.534298, 0.926169, 0.073873, 0.022565, 0.034394, 0.684913, 0.044353, 0.057921], &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.814103999999999952685847404155, 0.18525600000000001441047281503, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0494280000000000031834535008102, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.296171999999999997765787185244, 0.00342000000000000018828688608252, 1.0, 1.0, 1.0, 0.812340000000000062030380831857, 1.0, 1.0, 1.0, 1.0]),
    (&[0.107354, 0.045469, 0.04466, 0.006394, 0.056413], &[0.536770000000000024886759319998, 0.227345000000000012352341371979, 0.223299999999999991551202782603, 0.0319700000000000018884893648874, 0.282064999999999989344079409648]),
];

// 50-digit reference evaluations, rounded to f64.
#[allow(dead_code)]
// (x, sigma, k, value, derivative)
const NSP_REF: [(f64, f64, f64, f64, f64); 18] = [
    (-3.0, 1.0, 0.19, 2.639199848339235e-08, 1.389052455284147e-07),
    (-1.0, 0.5, 0.3, 0.0001907737034009629, 0.0012710162630813582),
    (-0.25, 0.2, 0.35, 0.0019409369131384371, 0.027346786796182878),
    (-0.01, 0.05, 0.3, 0.006215551302781081, 0.33924363123418283),
    (0.0, 1.0, 0.19, 0.1316979643063896, 0.5),
    (0.0, 0.45, 0.3, 0.09357486937559262, 0.5),
    (0.01, 0.05, 0.3, 0.01621555130278108, 0.6607563687658172),
    (0.1, 0.2, 0.3, 0.11038047933315034, 0.8411308951190849),
    (0.3, 0.45, 0.3, 0.3138899723531591, 0.9022274001492007),
    (0.5, 1.0, 0.19, 0.5132037030588068, 0.9328665011154179),
    (1.0, 0.1, 0.35, 1.0000000000000138, 0.9999999999996095),
    (2.5, 0.8, 0.3, 2.500007182967303, 0.9999700714174392),
    (-0.6, 0.15, 0.3, 7.288179663452135e-08, 1.6195941692230886e-06),
    (0.75, 2.0, 0.4, 1.0143665660817764, 0.7185943925708561),
    (-40.0, 1.0, 1.0, 4.248354255291589e-18, 4.248354255291589e-18),
    (40.0, 1.0, 1.0, 40.0, 1.0),
    (1e-06, 0.001, 0.3, 0.00020844457083445735, 0.5008333325617292),
    (-2.0, 3.0, 0.19, 0.016811799517258096, 0.02906367068118913),
];
#[allow(dead_code)]
// (m, s, dt, i_offset, rate)
const SIEGERT_REF: [(f64, f64, f64, f64, f64); 8] = [
    (0.0, 0.2, 1.0, 0.1, 0.9847877493922239),
    (0.2, 0.5, 1.0, 0.1, 55.643396381551476),
    (0.4, 0.2, 1.0, 0.1, 96.7215496824121),
    (0.8, 1.0, 0.1, 0.1, 176.861812554187),
    (-0.2, 1.0, 1.0, 0.0, 2.354308288236132),
    (0.1, 0.3, 0.1, 0.1, 20.07512165135573),
    (0.5, 0.5, 1.0, 0.0, 99.47463388806236),
    (0.0, 1.5, 0.1, 0.1, 12.837270338146125),
];

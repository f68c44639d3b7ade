"""Fully symmetric triangle quadrature rules, degrees 1 through 20.

Each rule is a list of orbits ``(weight, a, b)`` in barycentric coordinates:

* ``b is None and a is None``: the centroid,
* ``b is None``: the three points ``(a, a, 1 - 2a)`` and permutations,
* otherwise: the six permutations of ``(a, b, 1 - a - b)``.

Weights are per point and sum to one over the full (expanded) rule.
Values are Xiao-Gimbutas rules; all points interior, all weights positive.
"""

RULES = {
    1: [
        (1.0, None, None),
    ],
    2: [
        (0.3333333333333333, 0.16666666666666666, None),
    ],
    3: [
        (0.16666666666666666, 0.109039009072877, 0.659027622374092),
    ],
    4: [
        (0.109951743655322, 0.091576213509771, None),
        (0.223381589678011, 0.445948490915965, None),
    ],
    5: [
        (0.225, None, None),
        (0.12593918054482717, 0.10128650732345633, None),
        (0.13239415278850616, 0.47014206410511505, None),
    ],
    6: [
        (0.050844906370207, 0.063089014491502, None),
        (0.116786275726379, 0.24928674517091, None),
        (0.082851075618374, 0.05314504984481605, 0.636502499121399),
    ],
    7: [
        (0.05318083329676046, 0.47319565368925104, None),
        (0.04091817039405687, 0.057797640054506494, None),
        (0.12772524856113385, 0.24166360639724743, None),
        (0.055754540540691094, 0.6936897820041288, 0.046971206130085534),
    ],
    8: [
        (0.1443156076777872, None, None),
        (0.10321737053471824, 0.17056930775176027, None),
        (0.09509163426728463, 0.4592925882927231, None),
        (0.03245849762319808, 0.05054722831703107, None),
        (0.027230314174434996, 0.7284923929554042, 0.008394777409957675),
    ],
    9: [
        (0.09713579628279884, None, None),
        (0.03133470022713907, 0.4896825191987376, None),
        (0.07964773892721026, 0.1882035356190328, None),
        (0.07782754100477428, 0.43708959149293664, None),
        (0.025577675658698035, 0.04472951339445275, None),
        (0.043283539377289376, 0.741198598784498, 0.0368384120547363),
    ],
    10: [
        (0.08361487437397393, None, None),
        (0.009792590498418303, 0.4951734598011705, None),
        (0.006385359230118654, 0.019139415242841296, None),
        (0.07863376974637727, 0.18448501268524653, None),
        (0.07524732796854398, 0.42823482094371884, None),
        (0.028962281463256342, 0.8315416244168035, 0.03472362048232748),
        (0.038739049086018905, 0.6357241363774715, 0.03758272734119169),
    ],
    11: [
        (0.08144513470935129, None, None),
        (0.012249296950707964, 0.030846895635588123, None),
        (0.012465491873881381, 0.49878016517846074, None),
        (0.04012924238130832, 0.11320782728669404, None),
        (0.06309487215989869, 0.4366550163931761, None),
        (0.06784510774369515, 0.21448345861926937, None),
        (0.014557623337809246, 0.8263297175927509, 0.014366662569555624),
        (0.04064284865588647, 0.6417047167143861, 0.04766406697215078),
    ],
    12: [
        (0.06254121319590276, 0.27146250701492614, None),
        (0.02848605206887755, 0.10925782765935432, None),
        (0.04991833492806095, 0.4401116486585931, None),
        (0.024266838081452035, 0.4882037509455415, None),
        (0.007931642509973639, 0.02464636343633564, None),
        (0.04322736365941421, 0.628249751683556, 0.1162960196779266),
        (0.015083677576511441, 0.85133779251024, 0.021382490256170623),
        (0.02178358503860756, 0.6853101639063919, 0.023034156355267166),
    ],
    13: [
        (0.05162264666429082, None, None),
        (0.009941476361072588, 0.4961358947410461, None),
        (0.03278124160372298, 0.4696086896534919, None),
        (0.04606240959277825, 0.23111028494908226, None),
        (0.0469470955421552, 0.4144775702790546, None),
        (0.030903097975759793, 0.11355991257213327, None),
        (0.008029399795258423, 0.024895931491216494, None),
        (0.01812549864620088, 0.6889333070396046, 0.01898800438375904),
        (0.037211960457261536, 0.6355187156236324, 0.09773603106601653),
        (0.015393072683782177, 0.8512338800096335, 0.021966344206529244),
    ],
    14: [
        (0.032788353544125355, 0.41764471934045394, None),
        (0.014433699669776668, 0.0617998830908727, None),
        (0.051774104507291585, 0.2734775283088387, None),
        (0.04216258873699302, 0.1772055324125435, None),
        (0.004923403602400082, 0.0193909612487011, None),
        (0.021883581369428893, 0.4889639103621786, None),
        (0.014436308113533842, 0.6869801678080878, 0.014646950055654471),
        (0.038571510787060684, 0.5702222908466832, 0.09291624935697185),
        (0.024665753212563677, 0.7706085547749965, 0.05712475740364799),
        (0.005010228838500672, 0.8797571713701711, 0.001268330932872076),
    ],
    15: [
        (0.02973041974807132, None, None),
        (0.0073975040670461, 0.1299782299330779, None),
        (0.021594087936438452, 0.4600769492970597, None),
        (0.0158322763500218, 0.4916858166302972, None),
        (0.046287286105198076, 0.22153234079514206, None),
        (0.046336041391207235, 0.39693373740906057, None),
        (0.015084474247597068, 0.0563419176961002, None),
        (0.024230008783125607, 0.7330839951106168, 0.08459422148219181),
        (0.01122850429887806, 0.8337725261484158, 0.016027089786345473),
        (0.03107522047051095, 0.5792382424060449, 0.09765044243024235),
        (0.016436762092827895, 0.6735980666116939, 0.018454251904633165),
        (0.0024752660145579163, 0.9608512354248769, 0.0011135352740137417),
    ],
    16: [
        (0.046227910314191344, None, None),
        (0.012425425595561009, 0.06667447224023837, None),
        (0.04118404106979255, 0.24132168070137838, None),
        (0.040985219786815366, 0.41279809595522365, None),
        (0.02878349670274891, 0.15006373658703515, None),
        (0.02709366946771045, 0.46954803099668496, None),
        (0.003789135238264222, 0.017041629405718517, None),
        (0.008182210553222139, 0.5765655597692545, 0.009664954403660254),
        (0.013983607124653567, 0.6655146084153338, 0.030305943355186365),
        (0.005751869970497159, 0.8995779382011904, 0.010812972776103751),
        (0.031646061681983244, 0.5967314670634687, 0.10665316053614844),
        (0.017653081047103284, 0.7788823295056971, 0.051354315344013114),
        (0.0046146906397291345, 0.7822542773667971, 0.0036969427073556124),
    ],
    17: [
        (0.027310926528102106, 0.4171034443615992, None),
        (0.026312630588017985, 0.18035811626637066, None),
        (0.03771623715279528, 0.2857065024365867, None),
        (0.012459000802305444, 0.06665406347959701, None),
        (0.002773887577637642, 0.014755491660754072, None),
        (0.02501945095049736, 0.46559787161889027, None),
        (0.004584348401735868, 0.9159193532978169, 0.011575175903180683),
        (0.010398439955839537, 0.571294867944684, 0.013229672760086951),
        (0.008692214501001192, 0.7150722591106424, 0.013135870834002753),
        (0.02617162593533699, 0.5432755795961597, 0.15750547792686992),
        (0.022487772546691067, 0.6263690303864522, 0.06734937786736123),
        (0.02055789832045452, 0.7532351459364581, 0.07804234056828245),
        (0.007978300205929593, 0.824790070165088, 0.016017642362119337),
    ],
    18: [
        (0.03074852123911586, None, None),
        (0.013107027491738756, 0.4749182113240457, None),
        (0.0203183388454584, 0.15163850697260495, None),
        (0.0334719940598479, 0.4110671018759195, None),
        (0.031116396602006133, 0.2656146099053742, None),
        (0.0005320056169477806, 0.0037589443410684376, None),
        (0.013790286604766942, 0.072438705567333, None),
        (0.015328258194553142, 0.5245289252324956, 0.09042704035434063),
        (0.004217516774744443, 0.9402249256838527, 0.012498932483495477),
        (0.016365908413986566, 0.6439263069481049, 0.05401173533902428),
        (0.007729835280006227, 0.7329888214065166, 0.010505018819241962),
        (0.01691165391748008, 0.7553984164057089, 0.06612245802840343),
        (0.02759288648857948, 0.5823597834782124, 0.14906691012577386),
        (0.009586124474361505, 0.5772425066507145, 0.011691824674667157),
        (0.007641704972719637, 0.8528896449496688, 0.014331524778941987),
    ],
    19: [
        (0.034469160850905275, None, None),
        (0.007109393622794947, 0.05252627985410363, None),
        (0.015234956517004836, 0.11144805571699878, None),
        (0.0017651924183085402, 0.011639027327922657, None),
        (0.03175285458752998, 0.25516213315312486, None),
        (0.03153735864523962, 0.4039697179663861, None),
        (0.02465198105358483, 0.17817100607962755, None),
        (0.022983570977123252, 0.4591943889568276, None),
        (0.010321882182418864, 0.4925124498658742, None),
        (0.0029256924878800715, 0.8525725750765226, 0.005005142352350433),
        (0.0033273888405939045, 0.9301390385986208, 0.009777061438676854),
        (0.009695519081624202, 0.8301568806048566, 0.039142449434608845),
        (0.026346264707445364, 0.5593688070080342, 0.129312809767979),
        (0.018108074590430505, 0.7040048688065315, 0.07456118930435514),
        (0.016102209460939428, 0.60508575853531, 0.04088831446497813),
        (0.00845592483909348, 0.7431822570856689, 0.014923638907438481),
        (0.0032821375148397378, 0.6333104818121876, 0.0020691038491023883),
    ],
    20: [
        (0.027820221402906232, None, None),
        (0.01834692594850583, 0.18629499774454095, None),
        (0.0043225508213311555, 0.037310880598884766, None),
        (0.014203650606816881, 0.476245611540499, None),
        (0.018904799866464896, 0.4455510569559248, None),
        (0.028166402615040498, 0.25457926767333916, None),
        (0.027576101258140917, 0.39342534781709987, None),
        (0.00159768158213324, 0.01097614102839789, None),
        (0.01566046155214907, 0.10938359671171471, None),
        (0.002259739204251731, 0.9310544767839422, 0.004854937607623827),
        (0.015445215644198462, 0.6781657378896355, 0.10622720472027006),
        (0.004405794837116996, 0.8332955118382361, 0.007570780504696579),
        (0.02338349146365547, 0.5423318041724281, 0.13980807199179993),
        (0.01197279715790938, 0.7549215028635474, 0.04656036490766434),
        (0.008291423055227716, 0.8616840189364867, 0.038363684775374655),
        (0.007391363000510596, 0.5701446928909734, 0.009831548292802588),
        (0.01733445113443867, 0.6118777035474257, 0.05498747914298685),
        (0.007156400476915371, 0.7086813757203236, 0.01073721285601111),
    ],
}

# Спектр и кластеры
SPECTRUM_CONFIG = {
    'd': 2,                    # размерность сферы
    'mass': 1.0,               # масса m
    'delta': 0.1,              # амплитуда сдвига частот
    'W_max': 8,                # вес отсечения
    'c0': 0.5,                 # константа асимптотики
    'gamma': 1.0,              # показатель роста частот
    'samples_per_axis': 64     # разрешение сетки параметров
}

# Нормы блочных матриц и струй
NORM_CONFIG = {
    's': 2.0,
    'beta': 0.5,
    'sigma': 0.5,
    'mu': 1.0,
    'svd_max_dim': 64,         # выше - степенной метод
    'power_tol': 1e-12,
    'power_max_iter': 500,
    'rho_step': 1e-4           # шаг центральных разностей по rho
}

# Ряды Фурье-Тейлора
SERIES_CONFIG = {
    'K_max': 6,                # отсечение Фурье (по каждой оси)
    'D_r': 1,                  # степень по r
    'D_zeta': 4,               # степень по zeta
    'hard_degree_limit': 8,    # предел, выше которого ряд не строится
    'convolve_method': 'auto'
}

# Потоки струй
FLOW_CONFIG = {
    'steps': 128,              # шаги RK4 на [0, t]
    'max_steps': 2048,
    'richardson_tol': 1e-10,
    'series_tol': 1e-14,
    'series_max_order': 30,
    'eta': 0.5,
    'nu': 0.5,
    'lie_order_cap': 12,
    'lie_tol': 1e-15,
    'lie_ratio': 0.5
}

# Гомологическое уравнение
SOLVER_CONFIG = {
    'kappa': 1e-3,
    'N': 4,
    'sigma_prime': 0.3,
    'residual_tol': 1e-10,
    'gauss_nodes': 5           # квадратура по t в шаге KAM
}

# Расписание параметров KAM
SCHEDULE_CONFIG = {
    'sigma0': 1.0,
    'mu0': 1.0,
    'M': 1.0,
    'gate': 'enforce',         # enforce | report
    'floor': 1e-14,
    'accept_ratio': 0.5,       # допустимое сжатие при промахе цели
    'smallness': 'abort',      # abort | exclude | report
    'check_points': 4          # точки для проверок потока
}

# Задача Клейна-Гордона на S^2
KG_CONFIG = {
    'eps': 1e-5,
    'admissible': [(1, 1, 1.5), (2, 1, 1.5)],
    'quad_extra_degree': 0
}

# Запуск и сохранение результатов
RUNNER_CONFIG = {
    'out': 'runs',
    'seed': 0,
    'threads': 1,
    'steps': 3,
    'float_format': '%.17g'
}
